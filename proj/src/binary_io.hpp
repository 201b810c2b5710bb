#ifndef PARASHIELD_SRC_BINARY_IO_HPP_
#define PARASHIELD_SRC_BINARY_IO_HPP_

// Little helpers shared by the binary file formats. Values are written in
// host byte order; the formats are meant for same-machine caching.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "parashield/errors.hpp"

namespace parashield::detail {

/* 64-bit FNV-1a. */
class Fnv1a {
public:
  void put(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

class StreamSink {
public:
  explicit StreamSink(std::ostream& os) : os_(os) {}
  void put(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }

private:
  std::ostream& os_;
};

template <class Sink, class T> void put_pod(Sink& sink, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  sink.put(&v, sizeof(T));
}

template <class T> T get_pod(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is)
    throw FormatError("unexpected end of file");
  return v;
}

inline void expect_magic(std::istream& is, const std::string& magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!is || got != magic)
    throw FormatError("bad magic: expected " + magic);
}

} // namespace parashield::detail

#endif // PARASHIELD_SRC_BINARY_IO_HPP_
