// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cfwb {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'C', 'F', 'W', 'B', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));

  std::string header;
  for (const auto& [k, v] : ckpt.config) header += k + "=" + v + "\n";
  put_u32(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));

  for (const auto& [name, tensor] : ckpt.tensors) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(tensor.data()),
             static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!os) throw DataError("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("checkpoint: bad magic in '" + path + "'");
  }
  Checkpoint ckpt;
  const std::uint32_t header_len = get_u32(is);
  std::string header(header_len, '\0');
  is.read(header.data(), header_len);
  if (!is) throw FormatError("checkpoint: truncated header");
  std::size_t pos = 0;
  while (pos < header.size()) {
    const std::size_t nl = header.find('\n', pos);
    const std::string line = header.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? header.size() : nl + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed header line '" + line + "'");
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
  }

  while (true) {
    unsigned char probe;
    is.read(reinterpret_cast<char*>(&probe), 1);
    if (is.eof()) break;
    if (!is) throw FormatError("checkpoint: read error");
    is.putback(static_cast<char>(probe));

    const std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(is);
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = get_u32(is);
    std::vector<double> data(shape_size(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw FormatError("checkpoint: truncated tensor '" + name + "'");
    ckpt.tensors.emplace_back(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

}  // namespace cfwb
