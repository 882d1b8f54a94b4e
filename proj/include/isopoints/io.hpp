#pragma once

#include <isopoints/fitting.hpp>
#include <isopoints/siren.hpp>
#include <isopoints/types.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace iso {

/// ASCII PLY 1.0 with float x y z nx ny nz, 9 significant digits.
void write_ply(const std::string& path, const OrientedPoints& cloud);
void write_ply(std::ostream& out, const OrientedPoints& cloud);

/// Reads ASCII PLY vertices. Normals are filled when nx ny nz are present.
OrientedPoints read_ply(const std::string& path);
OrientedPoints read_ply(std::istream& in);

/// Binary weights: "ISOW", u32 version 1, u32 layer count, then per layer
/// u32 in, u32 out, f32 omega, f32 weights row-major, f32 biases. Little-endian.
void write_weights(const std::string& path, const SirenNetwork& net);
void write_weights(std::ostream& out, const SirenNetwork& net);
SirenNetwork read_weights(const std::string& path);
SirenNetwork read_weights(std::istream& in);

/// iter,L_onSDF,L_normal,L_offSDF,L_eikonal,L_isoSDF,L_isoNormal,wall_seconds
void write_log_csv(const std::string& path, const std::vector<LogEntry>& log);
void write_log_csv(std::ostream& out, const std::vector<LogEntry>& log);

/// Shortest decimal text that re-parses to the same double.
std::string format_real(double v);

}  // namespace iso
