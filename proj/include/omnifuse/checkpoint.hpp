#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnifuse/distill.hpp"
#include "omnifuse/experts.hpp"
#include "omnifuse/fusion.hpp"
#include "omnifuse/rescale.hpp"
#include "omnifuse/world.hpp"

namespace omnifuse {

enum class CheckpointError {
    bad_magic,
    unsupported_version,
    truncated,
    digest_mismatch,
    bad_content,
    io_failure,
};

class CheckpointException : public std::runtime_error {
public:
    CheckpointException(CheckpointError code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    CheckpointError code() const { return code_; }

private:
    CheckpointError code_;
};

// One serialized object: a small JSON manifest (content type, seed, config
// digest, named scalars/strings) followed by named tensor blobs. Binary
// layout: magic "OMNF", u32 version, length-prefixed manifest, then per
// tensor a length-prefixed name, u32 ndim, u64 dims and f64 little-endian
// values.
struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    std::string content_type;
    uint64_t seed = 0;
    std::string config_digest;
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> strings;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add_tensor(const std::string& name, Tensor t);
    const Tensor& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
    double scalar(const std::string& name) const;
    const std::string& str(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
// expected_digest, when nonempty, must match the stored config digest
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_digest = "");

// Object <-> checkpoint codecs for every persisted artifact.
class CheckpointCodec {
public:
    static void put_net(Checkpoint& ck, const std::string& prefix, const Sequential& net);
    static Sequential get_net(const Checkpoint& ck, const std::string& prefix);

    static Checkpoint save_world(const World& world);
    static World load_world(const Checkpoint& ck);

    static Checkpoint save_bank(const ExpertBank& bank);
    static ExpertBank load_bank(const Checkpoint& ck);

    static Checkpoint save_dataset(const SyntheticDataset& ds);
    static SyntheticDataset load_dataset(const Checkpoint& ck);

    static void put_rescaler(Checkpoint& ck, const std::string& prefix, const Rescaler& r);
    static Rescaler get_rescaler(const Checkpoint& ck, const std::string& prefix);

    static void put_fusion(Checkpoint& ck, const std::string& prefix, const FusionOperator& op);
    static FusionOperator get_fusion(const Checkpoint& ck, const std::string& prefix);

    static Checkpoint save_student(const StudentEncoder& s);
    static StudentEncoder load_student(const Checkpoint& ck);

    static Checkpoint save_mt(const MtModel& mt);
    static MtModel load_mt(const Checkpoint& ck);
};

}  // namespace omnifuse
