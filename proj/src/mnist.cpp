#include <cstdlib>
#include <iomanip>
#include <sstream>
#include <thread>

#include <openssl/evp.h>
#include <zlib.h>

#include "koopnet/datasets.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

namespace koopnet::data {

const std::array<RemoteFile, 4>& mnist_files() {
  static const std::array<RemoteFile, 4> files{{
      {"train-images-idx3-ubyte", "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db"},
      {"train-labels-idx1-ubyte", "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5"},
      {"t10k-images-idx3-ubyte", "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7"},
      {"t10k-labels-idx1-ubyte", "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2"},
  }};
  return files;
}

std::filesystem::path default_cache_dir() {
  if (const char* dir = std::getenv("KOOPNET_CACHE_DIR"); dir != nullptr && *dir != '\0') return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg != nullptr && *xdg != '\0') {
    return std::filesystem::path(xdg) / "koopnet";
  }
  if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return std::filesystem::path(home) / ".cache" / "koopnet";
  }
  return std::filesystem::temp_directory_path() / "koopnet-cache";
}

std::string default_mnist_url() {
  if (const char* url = std::getenv("KOOPNET_MNIST_URL"); url != nullptr && *url != '\0') return url;
  return "https://ossci-datasets.s3.amazonaws.com/mnist";
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest computation failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw std::runtime_error("gunzip: inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("gunzip: corrupt stream (zlib code " + std::to_string(rc) + ")");
    }
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(chunk.size() - zs.avail_out));
    if (rc != Z_STREAM_END && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError("gunzip: truncated stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw FetchError("fetch: malformed base url '" + url + "'", 0);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

bool file_matches(const std::filesystem::path& path, const std::string& digest) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return false;
  return sha256_hex(read_file_bytes(path)) == digest;
}

}  // namespace

std::filesystem::path ensure_mnist(const std::filesystem::path& cache_dir, const FetchOptions& options) {
  const std::filesystem::path dir = cache_dir / "mnist";
  std::filesystem::create_directories(dir);
  std::vector<RemoteFile> files = options.files;
  if (files.empty()) files.assign(mnist_files().begin(), mnist_files().end());

  std::vector<const RemoteFile*> missing;
  for (const RemoteFile& f : files) {
    if (!file_matches(dir / f.name, f.sha256)) missing.push_back(&f);
  }
  if (missing.empty()) return dir;

  const std::string base = options.base_url.empty() ? default_mnist_url() : options.base_url;
  const ParsedUrl url = parse_url(base);
  httplib::Client client(url.origin);
  client.set_follow_location(true);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);

  const int attempts_allowed = std::max(1, options.retries);
  for (const RemoteFile* f : missing) {
    std::string last_error;
    bool done = false;
    int attempt = 0;
    while (!done && attempt < attempts_allowed) {
      ++attempt;
      for (const std::string& suffix : {std::string(".gz"), std::string()}) {
        auto res = client.Get(url.path + "/" + f->name + suffix);
        if (!res) {
          last_error = "transport error: " + httplib::to_string(res.error());
          continue;
        }
        if (res->status != 200) {
          last_error = "HTTP " + std::to_string(res->status) + " for " + f->name + suffix;
          continue;
        }
        std::vector<std::uint8_t> payload(res->body.begin(), res->body.end());
        if (payload.size() >= 2 && payload[0] == 0x1f && payload[1] == 0x8b) payload = gunzip(payload);
        const std::string got = sha256_hex(payload);
        if (got != f->sha256) {
          last_error = "sha256 mismatch for " + f->name + ": got " + got;
          continue;
        }
        const auto tmp = dir / (f->name + ".part");
        write_file_bytes(tmp, payload);
        std::filesystem::rename(tmp, dir / f->name);
        done = true;
        break;
      }
      if (!done && attempt < attempts_allowed) std::this_thread::sleep_for(options.backoff * attempt);
    }
    if (!done) {
      throw FetchError("fetch: " + f->name + " from " + base + " failed after " + std::to_string(attempt) +
                           " attempts (" + last_error + ")",
                       attempt);
    }
  }
  return dir;
}

}  // namespace koopnet::data
