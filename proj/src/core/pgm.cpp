#include "core/pgm.hpp"

#include <fstream>

namespace himap {

void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int h, int w) {
  if (static_cast<int64_t>(pixels.size()) != static_cast<int64_t>(h) * w) {
    throw Error(ErrorKind::internal, "pgm: pixel count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::data, "cannot write " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

std::vector<uint8_t> read_pgm(const std::string& path, int* h_out, int* w_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data, "cannot read " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255) throw Error(ErrorKind::data, "unsupported pgm " + path);
  in.get();  // single whitespace after the header
  std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!in) throw Error(ErrorKind::data, "truncated pgm " + path);
  if (h_out) *h_out = h;
  if (w_out) *w_out = w;
  return pixels;
}

}  // namespace himap
