// tests/test_util.h

// Copyright 2024  The stepscore authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef STEPSCORE_TESTS_TEST_UTIL_H_
#define STEPSCORE_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testutil {

// Fresh scratch directory under the process temp dir; removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    const auto base = std::filesystem::temp_directory_path();
    do {
      path_ = base / ("stepscore_test_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    } while (std::filesystem::exists(path_));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string &name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void put_le16(std::vector<uint8_t> &v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

inline void put_le32(std::vector<uint8_t> &v, uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back((x >> (8 * i)) & 0xff);
}

// Minimal PCM16 mono WAV byte image.
inline std::vector<uint8_t> wav_bytes(const std::vector<int16_t> &pcm,
                                      uint32_t rate, uint16_t channels = 1,
                                      uint16_t bits = 16,
                                      uint16_t format = 1) {
  std::vector<uint8_t> v;
  const uint32_t data_bytes = static_cast<uint32_t>(pcm.size() * 2);
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  put_le32(v, 36 + data_bytes);
  v.insert(v.end(), {'W', 'A', 'V', 'E'});
  v.insert(v.end(), {'f', 'm', 't', ' '});
  put_le32(v, 16);
  put_le16(v, format);
  put_le16(v, channels);
  put_le32(v, rate);
  put_le32(v, rate * channels * bits / 8);
  put_le16(v, channels * bits / 8);
  put_le16(v, bits);
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  put_le32(v, data_bytes);
  for (int16_t s : pcm) put_le16(v, static_cast<uint16_t>(s));
  return v;
}

inline void write_bytes(const std::string &path,
                        const std::vector<uint8_t> &bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char *>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

}  // namespace testutil

#endif  // STEPSCORE_TESTS_TEST_UTIL_H_
