#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace npae {

/// Write bytes to a temporary sibling file, then rename into place, so
/// readers never observe a partial file. Throws IoError.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

/// Read a whole file as bytes. Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Run fn(i) for i in [0, count) on up to `threads` workers. Each index
/// must write only its own output slot; under that discipline results
/// are identical for every thread count. Exceptions propagate.
void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& fn);

}  // namespace npae
