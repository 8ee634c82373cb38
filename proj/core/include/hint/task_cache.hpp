#pragma once

#include "hint/hypernet.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hint {

// Directory of serialized task contexts (encoded instruction + generated
// modules), one file per task. Entries remember the checkpoint fingerprint
// they were generated from; loading against a different checkpoint fails
// loudly rather than silently mixing stale modules into a new model.
class TaskCache {
public:
    explicit TaskCache(std::string dir);

    struct Entry {
        std::string task_id;
        std::string path;
        std::string checkpoint_fingerprint;
        std::uint64_t bytes = 0;
    };

    std::string put(const TaskContext& ctx, const ModelConfig& mc,
                    const std::string& checkpoint_fingerprint); // returns path
    TaskContext get(const std::string& task_id, const ModelConfig& mc,
                    const std::string& checkpoint_fingerprint) const;
    bool contains(const std::string& task_id) const;
    bool evict(const std::string& task_id); // false if absent
    std::vector<Entry> list() const;

    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::string path_for(const std::string& task_id) const;
};

} // namespace hint
