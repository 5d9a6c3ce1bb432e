#include <zlib.h>

#include <cstring>
#include <string>

#include "scimine/error.hpp"
#include "scimine/latex_corpus.hpp"

namespace scimine {

std::string gunzip(std::string_view data) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw Error(ErrorCode::Io, "inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[65536];
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::Io, "gzip stream corrupt");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
  } while (ret != Z_STREAM_END && zs.avail_in > 0);
  inflateEnd(&zs);
  if (ret != Z_STREAM_END) throw Error(ErrorCode::Io, "gzip stream truncated");
  return out;
}

std::string gzip(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorCode::Io, "deflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[65536];
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    ret = deflate(&zs, Z_FINISH);
    out.append(buf, sizeof(buf) - zs.avail_out);
  } while (ret == Z_OK);
  deflateEnd(&zs);
  if (ret != Z_STREAM_END) throw Error(ErrorCode::Io, "gzip deflate failed");
  return out;
}

namespace {

constexpr size_t kBlock = 512;

size_t parse_octal(const char* p, size_t n) {
  size_t v = 0;
  for (size_t i = 0; i < n && p[i]; ++i) {
    if (p[i] == ' ') continue;
    if (p[i] < '0' || p[i] > '7') break;
    v = v * 8 + static_cast<size_t>(p[i] - '0');
  }
  return v;
}

std::string field(const char* p, size_t n) { return std::string(p, strnlen(p, n)); }

bool is_zero_block(const char* p) {
  for (size_t i = 0; i < kBlock; ++i)
    if (p[i]) return false;
  return true;
}

std::string sanitize_path(std::string path) {
  while (path.rfind("./", 0) == 0) path.erase(0, 2);
  while (!path.empty() && path.front() == '/') path.erase(0, 1);
  if (path.find("..") != std::string::npos) return {};
  return path;
}

}  // namespace

std::map<std::string, std::string> untar(std::string_view data) {
  std::map<std::string, std::string> files;
  size_t off = 0;
  std::string long_name;
  while (off + kBlock <= data.size()) {
    const char* h = data.data() + off;
    if (is_zero_block(h)) break;
    std::string name = field(h, 100);
    std::string prefix = field(h + 345, 155);
    size_t size = parse_octal(h + 124, 12);
    char type = h[156];
    off += kBlock;
    if (off + size > data.size()) throw Error(ErrorCode::Io, "tar member truncated: " + name);
    std::string_view body = data.substr(off, size);
    off += (size + kBlock - 1) / kBlock * kBlock;
    if (type == 'L') {
      long_name = std::string(body.substr(0, strnlen(body.data(), body.size())));
      continue;
    }
    if (type != '0' && type != '\0') {
      long_name.clear();
      continue;
    }
    std::string path = !long_name.empty() ? long_name : (prefix.empty() ? name : prefix + "/" + name);
    long_name.clear();
    path = sanitize_path(path);
    if (!path.empty()) files[path] = std::string(body);
  }
  return files;
}

std::string make_tar(const std::map<std::string, std::string>& files) {
  std::string out;
  for (const auto& [path, body] : files) {
    char h[kBlock];
    std::memset(h, 0, sizeof(h));
    if (path.size() >= 100) throw Error(ErrorCode::InvalidArgument, "tar path too long: " + path);
    std::memcpy(h, path.data(), path.size());
    std::snprintf(h + 100, 8, "%07o", 0644);
    std::snprintf(h + 108, 8, "%07o", 0);
    std::snprintf(h + 116, 8, "%07o", 0);
    std::snprintf(h + 124, 12, "%011lo", static_cast<unsigned long>(body.size()));
    std::snprintf(h + 136, 12, "%011o", 0);
    h[156] = '0';
    std::memcpy(h + 257, "ustar", 5);
    std::memcpy(h + 263, "00", 2);
    std::memset(h + 148, ' ', 8);
    unsigned sum = 0;
    for (size_t i = 0; i < kBlock; ++i) sum += static_cast<unsigned char>(h[i]);
    std::snprintf(h + 148, 8, "%06o", sum);
    out.append(h, kBlock);
    out.append(body);
    out.append((kBlock - body.size() % kBlock) % kBlock, '\0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

std::map<std::string, std::string> unpack_eprint(std::string_view payload) {
  std::string raw;
  bool gz = payload.size() >= 2 && static_cast<unsigned char>(payload[0]) == 0x1f &&
            static_cast<unsigned char>(payload[1]) == 0x8b;
  raw = gz ? gunzip(payload) : std::string(payload);
  if (raw.rfind("%PDF", 0) == 0) throw Error(ErrorCode::NoSource, "e-print is a PDF, no LaTeX source");
  bool is_tar = raw.size() >= 263 && raw.compare(257, 5, "ustar") == 0;
  if (is_tar) return untar(raw);
  return {{"main.tex", raw}};
}

}  // namespace scimine
