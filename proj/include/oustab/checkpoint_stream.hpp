#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace oustab {

// A saved sequence of parameter checkpoints: a plain-text manifest plus a
// binary payload of little-endian 64-bit floats, one d-vector per record.
// The two-file layout keeps replay tooling dependency-free and bit-exact.
//
// Manifest layout (whitespace-separated key/value lines):
//   oustab-checkpoint-stream 1
//   payload <filename relative to the manifest>
//   dim <d>
//   count <n>
//   elem_width 8
//   byte_order little
//   record <step_index> <byte_offset>   (n lines, step indices strictly increasing)
struct CheckpointStream {
  Eigen::Index dim = 0;
  std::vector<long> step_indices;
  Eigen::MatrixXd records;  // one row per record

  long count() const { return static_cast<long>(step_indices.size()); }
};

// Throws ValidationError when shape/monotonicity invariants do not hold.
void validate_checkpoint_stream(const CheckpointStream& stream);

void write_checkpoint_stream(const CheckpointStream& stream,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& payload_path);

// Reads and fully validates a stream; payload resolved relative to the
// manifest.  Truncated payloads and non-monotone step indices raise
// FormatError with the expected/actual byte counts.
CheckpointStream read_checkpoint_stream(const std::filesystem::path& manifest_path);

}  // namespace oustab
