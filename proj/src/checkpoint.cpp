#include "cldyn/twolayer.hpp"

#include <cstring>
#include <fstream>

namespace cldyn {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'D', 'Y', 'N', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated checkpoint: " + path);
  return v;
}

void put_rows(std::ofstream& os, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put(os, m(i, j));
}

Matrix get_rows(std::ifstream& is, Index rows, Index cols, const std::string& path) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = get<double>(is, path);
  return m;
}

}  // namespace

// Layout: magic, version, K, M, d, d_out (int64), activation kind/power (int32), slope,
// then W and V row-major as native-endian doubles.
void save_checkpoint(const TwoLayerNet& net, const std::string& path) {
  net.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put<std::int64_t>(os, net.K);
  put<std::int64_t>(os, net.M);
  put<std::int64_t>(os, net.d);
  put<std::int64_t>(os, net.d_out);
  put<std::int32_t>(os, static_cast<std::int32_t>(net.act.kind));
  put<std::int32_t>(os, net.act.power);
  put<double>(os, net.act.slope);
  put_rows(os, net.W);
  put_rows(os, net.V);
  if (!os) throw Error("failed writing checkpoint: " + path);
}

TwoLayerNet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a network checkpoint: " + path);
  if (get<std::uint32_t>(is, path) != kVersion)
    throw FormatError("unsupported checkpoint version: " + path);
  TwoLayerNet net;
  net.K = get<std::int64_t>(is, path);
  net.M = get<std::int64_t>(is, path);
  net.d = get<std::int64_t>(is, path);
  net.d_out = get<std::int64_t>(is, path);
  if (net.K < 1 || net.M < 1 || net.d < 1 || net.d_out < 1 || net.K * net.M > (1 << 24))
    throw FormatError("implausible checkpoint dimensions: " + path);
  auto kind = get<std::int32_t>(is, path);
  if (kind < 0 || kind > 3) throw FormatError("unknown activation tag in " + path);
  net.act.kind = static_cast<Activation::Kind>(kind);
  net.act.power = get<std::int32_t>(is, path);
  net.act.slope = get<double>(is, path);
  net.W = get_rows(is, net.K * net.M, net.d, path);
  net.V = get_rows(is, net.d_out, net.K * net.M, path);
  return net;
}

}  // namespace cldyn
