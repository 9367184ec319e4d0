#include "oustab/checkpoint_stream.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "oustab/errors.hpp"

namespace oustab {

namespace {

static_assert(sizeof(double) == 8, "payload format requires 64-bit doubles");

void require_little_endian_host() {
  if constexpr (std::endian::native != std::endian::little) {
    throw UnsupportedConfigError("checkpoint streams are little-endian; big-endian hosts are not supported");
  }
}

}  // namespace

void validate_checkpoint_stream(const CheckpointStream& stream) {
  if (stream.dim <= 0) throw ValidationError("checkpoint stream: dim must be positive");
  if (stream.records.rows() != stream.count() || stream.records.cols() != stream.dim) {
    throw ValidationError("checkpoint stream: record matrix shape does not match manifest");
  }
  for (std::size_t i = 1; i < stream.step_indices.size(); ++i) {
    if (stream.step_indices[i] <= stream.step_indices[i - 1]) {
      throw ValidationError("checkpoint stream: step indices must be strictly increasing");
    }
  }
}

void write_checkpoint_stream(const CheckpointStream& stream,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& payload_path) {
  require_little_endian_host();
  validate_checkpoint_stream(stream);

  const long n = stream.count();
  const std::uint64_t record_bytes = static_cast<std::uint64_t>(stream.dim) * 8;

  std::ofstream payload(payload_path, std::ios::binary | std::ios::trunc);
  if (!payload) throw IoError("cannot open payload for writing: " + payload_path.string());
  std::vector<double> row(static_cast<std::size_t>(stream.dim));
  for (long i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < stream.dim; ++j) row[static_cast<std::size_t>(j)] = stream.records(i, j);
    payload.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(record_bytes));
  }
  payload.flush();
  if (!payload) throw IoError("failed writing payload: " + payload_path.string());

  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) throw IoError("cannot open manifest for writing: " + manifest_path.string());
  manifest << "oustab-checkpoint-stream 1\n";
  manifest << "payload " << payload_path.filename().string() << "\n";
  manifest << "dim " << stream.dim << "\n";
  manifest << "count " << n << "\n";
  manifest << "elem_width 8\n";
  manifest << "byte_order little\n";
  for (long i = 0; i < n; ++i) {
    manifest << "record " << stream.step_indices[static_cast<std::size_t>(i)] << " "
             << static_cast<std::uint64_t>(i) * record_bytes << "\n";
  }
  manifest.flush();
  if (!manifest) throw IoError("failed writing manifest: " + manifest_path.string());
}

CheckpointStream read_checkpoint_stream(const std::filesystem::path& manifest_path) {
  require_little_endian_host();

  std::ifstream manifest(manifest_path);
  if (!manifest) throw IoError("cannot open manifest: " + manifest_path.string());

  std::string line;
  if (!std::getline(manifest, line) || line != "oustab-checkpoint-stream 1") {
    throw FormatError("manifest " + manifest_path.string() +
                      ": missing 'oustab-checkpoint-stream 1' header");
  }

  std::string payload_name;
  Eigen::Index dim = -1;
  long count = -1;
  long elem_width = -1;
  std::string byte_order;
  std::vector<long> step_indices;
  std::vector<std::uint64_t> offsets;

  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "payload") {
      fields >> payload_name;
    } else if (key == "dim") {
      fields >> dim;
    } else if (key == "count") {
      fields >> count;
    } else if (key == "elem_width") {
      fields >> elem_width;
    } else if (key == "byte_order") {
      fields >> byte_order;
    } else if (key == "record") {
      long step = 0;
      std::uint64_t offset = 0;
      fields >> step >> offset;
      step_indices.push_back(step);
      offsets.push_back(offset);
    } else {
      throw FormatError("manifest " + manifest_path.string() + ": unknown key '" + key + "'");
    }
    if (fields.fail()) {
      throw FormatError("manifest " + manifest_path.string() + ": malformed line '" + line + "'");
    }
  }

  if (payload_name.empty()) throw FormatError("manifest missing 'payload' entry");
  if (dim <= 0) throw FormatError("manifest missing or invalid 'dim'");
  if (count < 0) throw FormatError("manifest missing 'count'");
  if (elem_width != 8) throw FormatError("manifest elem_width must be 8 (64-bit floats)");
  if (byte_order != "little") throw FormatError("manifest byte_order must be 'little'");
  if (static_cast<long>(step_indices.size()) != count) {
    throw FormatError("manifest record count " + std::to_string(step_indices.size()) +
                      " does not match declared count " + std::to_string(count));
  }
  for (std::size_t i = 1; i < step_indices.size(); ++i) {
    if (step_indices[i] <= step_indices[i - 1]) {
      throw FormatError("manifest step indices must be strictly increasing (record " +
                        std::to_string(i) + ")");
    }
  }

  const std::filesystem::path payload_path = manifest_path.parent_path() / payload_name;
  std::ifstream payload(payload_path, std::ios::binary | std::ios::ate);
  if (!payload) throw IoError("cannot open payload: " + payload_path.string());
  const std::uint64_t actual_bytes = static_cast<std::uint64_t>(payload.tellg());
  const std::uint64_t record_bytes = static_cast<std::uint64_t>(dim) * 8;
  const std::uint64_t expected_bytes = static_cast<std::uint64_t>(count) * record_bytes;
  if (actual_bytes != expected_bytes) {
    throw FormatError("payload " + payload_path.string() + ": expected " +
                      std::to_string(expected_bytes) + " bytes (count*dim*8), found " +
                      std::to_string(actual_bytes));
  }

  CheckpointStream stream;
  stream.dim = dim;
  stream.step_indices = std::move(step_indices);
  stream.records.resize(count, dim);
  std::vector<double> row(static_cast<std::size_t>(dim));
  for (long i = 0; i < count; ++i) {
    const std::uint64_t offset = offsets[static_cast<std::size_t>(i)];
    if (offset + record_bytes > actual_bytes) {
      throw FormatError("payload " + payload_path.string() + ": record " + std::to_string(i) +
                        " offset " + std::to_string(offset) + " overruns payload of " +
                        std::to_string(actual_bytes) + " bytes");
    }
    payload.seekg(static_cast<std::streamoff>(offset));
    payload.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(record_bytes));
    if (!payload) throw IoError("failed reading payload: " + payload_path.string());
    for (Eigen::Index j = 0; j < dim; ++j) stream.records(i, j) = row[static_cast<std::size_t>(j)];
  }
  return stream;
}

}  // namespace oustab
