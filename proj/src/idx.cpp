#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "koopnet/datasets.hpp"

namespace koopnet::data {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

std::size_t IdxArray::element_count() const {
  std::size_t count = 1;
  for (const std::uint32_t d : dims) count *= d;
  return count;
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
  if (bytes.size() < 4) {
    throw FormatError("idx: " + std::to_string(bytes.size()) + " bytes is too short for a header");
  }
  IdxArray out;
  out.magic = read_be32(bytes, 0);
  if (out.magic != expected_magic) {
    throw FormatError("idx: bad magic number " + hex32(out.magic) + ", expected " + hex32(expected_magic));
  }
  if (bytes[2] != 0x08) throw FormatError("idx: only unsigned-byte payloads are supported");
  const std::size_t rank = bytes[3];
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw FormatError("idx: truncated dimension header");
  for (std::size_t d = 0; d < rank; ++d) out.dims.push_back(read_be32(bytes, 4 + 4 * d));
  const std::size_t expected = out.element_count();
  const std::size_t available = bytes.size() - header;
  if (available < expected) {
    throw FormatError("idx: truncated payload, header announces " + std::to_string(expected) + " bytes but " +
                      std::to_string(available) + " are present");
  }
  if (available > expected) {
    throw FormatError("idx: " + std::to_string(available - expected) + " trailing bytes after payload");
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> encode_idx(const IdxArray& array) {
  if (array.data.size() != array.element_count()) throw FormatError("idx: payload size disagrees with dims");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * array.dims.size() + array.data.size());
  write_be32(out, (array.magic & 0xFFFFFF00u) | static_cast<std::uint32_t>(array.dims.size()));
  for (const std::uint32_t d : array.dims) write_be32(out, d);
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("short write to " + path.string());
}

LabeledDataset mnist_from_idx(const IdxArray& images, const IdxArray& labels, std::string name) {
  if (images.dims.size() != 3) throw FormatError("mnist: images must be a rank-3 array");
  if (labels.dims.size() != 1) throw FormatError("mnist: labels must be a rank-1 array");
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n) {
    throw FormatError("mnist: " + std::to_string(n) + " images but " + std::to_string(labels.dims[0]) + " labels");
  }
  const std::size_t pixels = std::size_t{images.dims[1]} * images.dims[2];
  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      out.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          static_cast<double>(images.data[i * pixels + p]) / 255.0;
    }
  }
  out.labels.reserve(n);
  for (const std::uint8_t y : labels.data) {
    if (y > 9) throw FormatError("mnist: label " + std::to_string(y) + " outside 0..9");
    out.labels.push_back(y);
  }
  out.n_classes = 10;
  out.name = std::move(name);
  return out;
}

IdxArray mnist_images_to_idx(const LabeledDataset& dataset) {
  const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(dataset.features()))));
  if (static_cast<Eigen::Index>(side) * side != dataset.features()) {
    throw FormatError("mnist: feature count is not a square image");
  }
  IdxArray out;
  out.magic = kIdxImagesMagic;
  out.dims = {static_cast<std::uint32_t>(dataset.size()), side, side};
  out.data.reserve(out.element_count());
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    for (Eigen::Index p = 0; p < dataset.features(); ++p) {
      out.data.push_back(static_cast<std::uint8_t>(std::lround(dataset.inputs(i, p) * 255.0)));
    }
  }
  return out;
}

IdxArray mnist_labels_to_idx(const LabeledDataset& dataset) {
  IdxArray out;
  out.magic = kIdxLabelsMagic;
  out.dims = {static_cast<std::uint32_t>(dataset.size())};
  for (const int y : dataset.labels) out.data.push_back(static_cast<std::uint8_t>(y));
  return out;
}

MnistSplits load_mnist(const std::filesystem::path& dir) {
  auto load = [&](const char* images, const char* labels, const char* name) {
    const auto img = read_file_bytes(dir / images);
    const auto lab = read_file_bytes(dir / labels);
    return mnist_from_idx(parse_idx(img, kIdxImagesMagic), parse_idx(lab, kIdxLabelsMagic), name);
  };
  MnistSplits out;
  out.train = load("train-images-idx3-ubyte", "train-labels-idx1-ubyte", "mnist-train");
  out.test = load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", "mnist-test");
  return out;
}

}  // namespace koopnet::data
