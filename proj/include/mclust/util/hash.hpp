#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <openssl/evp.h>

#include "mclust/util/error.hpp"

namespace mclust {

// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1)
            throw Error("SHA-256 update failed");
    }
    if (in.bad()) throw IoError("read error while hashing '" + path + "'");
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
    std::string hex;
    char pair[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(pair, sizeof pair, "%02x", md[i]);
        hex += pair;
    }
    return hex;
}

}  // namespace mclust
