#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "core/optim.hpp"

namespace himap {

// Checkpoint layout: a text manifest followed by a flat blob of little-endian
// 32-bit floats.
//
//   HIMAP-CKPT 1
//   <resolved run config as one JSON line>
//   <name> <d0>[,<d1>...] <byte_offset> <count>
//   ...
//   DATA <total_bytes>
//   <raw float32 data>
//
// Offsets are relative to the first data byte. Parameters are stored in
// sorted name order. Values are narrowed to float32 regardless of the
// training precision.
template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::string& config_json,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::data, "cannot write checkpoint " + path);
  out << "HIMAP-CKPT 1\n";
  out << config_json << "\n";
  uint64_t offset = 0;
  for (const auto& [name, p] : store.params()) {
    out << name << " ";
    for (size_t i = 0; i < p.shape.size(); ++i) out << (i ? "," : "") << p.shape[i];
    out << " " << offset << " " << p.value->size() << "\n";
    offset += p.value->size() * sizeof(float);
  }
  out << "DATA " << offset << "\n";
  for (const auto& [name, p] : store.params()) {
    for (T v : *p.value) {
      float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  }
  if (!out) throw Error(ErrorKind::data, "short write on checkpoint " + path);
}

// Reads the manifest; parameter entries are created in the store (replacing
// its contents). Returns the embedded config JSON line.
template <typename T>
std::string load_checkpoint(ParamStore<T>& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data, "cannot read checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "HIMAP-CKPT 1") {
    throw Error(ErrorKind::data, "bad checkpoint magic in " + path);
  }
  std::string config_json;
  if (!std::getline(in, config_json)) throw Error(ErrorKind::data, "truncated checkpoint " + path);

  struct Entry {
    std::string name;
    std::vector<int> shape;
    uint64_t offset = 0;
    uint64_t count = 0;
  };
  std::vector<Entry> entries;
  uint64_t total_bytes = 0;
  while (std::getline(in, line)) {
    if (line.rfind("DATA ", 0) == 0) {
      total_bytes = std::stoull(line.substr(5));
      break;
    }
    std::istringstream ls(line);
    Entry e;
    std::string dims;
    if (!(ls >> e.name >> dims >> e.offset >> e.count)) {
      throw Error(ErrorKind::data, "bad checkpoint manifest line: " + line);
    }
    std::istringstream ds(dims);
    std::string tok;
    while (std::getline(ds, tok, ',')) e.shape.push_back(std::stoi(tok));
    entries.push_back(std::move(e));
  }

  std::vector<char> blob(total_bytes);
  in.read(blob.data(), static_cast<std::streamsize>(total_bytes));
  if (static_cast<uint64_t>(in.gcount()) != total_bytes) {
    throw Error(ErrorKind::data, "truncated checkpoint data in " + path);
  }

  store.params().clear();
  for (const Entry& e : entries) {
    typename ParamStore<T>::Param p;
    p.shape = e.shape;
    if (Tensor<T>::numel(e.shape) != static_cast<int64_t>(e.count)) {
      throw Error(ErrorKind::data, "checkpoint shape/count mismatch for " + e.name);
    }
    p.value = std::make_shared<std::vector<T>>(e.count);
    const float* src = reinterpret_cast<const float*>(blob.data() + e.offset);
    for (uint64_t i = 0; i < e.count; ++i) (*p.value)[i] = static_cast<T>(src[i]);
    p.m.assign(e.count, T(0));
    p.v.assign(e.count, T(0));
    store.params()[e.name] = std::move(p);
  }
  return config_json;
}

}  // namespace himap
