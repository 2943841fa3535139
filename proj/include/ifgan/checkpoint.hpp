#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifgan/tensor.hpp"

namespace ifgan {

// Little-endian chunked container: magic "IFG1", u32 format version, then
// length-prefixed chunks (CONF config JSON, ARCH descriptor JSON, one PARM
// per tensor, OPTS optimizer states, PROG progress), closed by a CRC32 over
// every prior byte. Rewriting a loaded file reproduces it byte for byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct OptimizerStateBlob {
    std::string name;  // "G", "D", "E"
    double lr = 0, beta1 = 0, beta2 = 0, eps = 0;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config_json;
    std::string arch_json;
    std::vector<NamedTensor> tensors;  // params, buffers, average faces
    std::vector<OptimizerStateBlob> optimizers;
    std::uint64_t progress_step = 0;
    std::string rng_state;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);  // throws on corruption

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace ifgan
