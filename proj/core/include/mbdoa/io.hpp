#pragma once

// Binary file formats (all little-endian).
//
// Model file:
//   "MBDE" | u8 version=1 | i32 input_side | i32 sources | i32 covariance_mode (0 diag, 1 full)
//   | i32 conv_channels[4] | i32 kernel | i32 strides[4] | i32 paddings[4] | i32 hidden
//   | i32 parameter_count | f64 parameters[parameter_count] (manifest order)
//
// Snapshot file:
//   "DOAS" | u8 version=1 | i32 M | i32 N | N*M x (f64 re, f64 im), snapshot-major

#include <filesystem>
#include <iosfwd>

#include "mbdoa/array_model.hpp"
#include "mbdoa/encoder.hpp"

namespace mbdoa {

inline constexpr unsigned char kModelFormatVersion = 1;
inline constexpr unsigned char kSnapshotFormatVersion = 1;

void write_model(std::ostream& out, const EncoderModel& model);
/// Throws ConfigError naming the byte offset of the first malformed field.
EncoderModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const EncoderModel& model);
EncoderModel load_model(const std::filesystem::path& path);

void write_snapshots(std::ostream& out, const CMatrix& snapshots);
/// Returns the batch with its sample covariance filled in.
SnapshotBatch read_snapshots(std::istream& in);
void save_snapshots(const std::filesystem::path& path, const CMatrix& snapshots);
SnapshotBatch load_snapshots(const std::filesystem::path& path);

}  // namespace mbdoa
