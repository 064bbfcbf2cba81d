#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>

#include "imbp/continuous_engine.hpp"
#include "imbp/discrete_engine.hpp"
#include "imbp/stats.hpp"

namespace imbp {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

/// Header `t,z_1,...,z_d`, one row per breakpoint, LF line endings.
void write_path_csv(std::ostream& out, const Path& path, std::size_t d);

/// Several paths in one table with a leading `path` column: `path,t,z_1,...,z_d`.
void write_paths_csv(std::ostream& out, std::span<const Path> paths, std::size_t d);

/// One JSON object per line: {"path":k,"t":[...],"z":[[...],...]}.
void write_path_jsonl(std::ostream& out, const Path& path, std::size_t index);

/// One event per line, tagged with the path index.
void write_event_log_jsonl(std::ostream& out, const EventLog& log, std::size_t path_index);

/// Header `t,y_1,...,y_d,jump`; jump is 1 on steps that contained a jump.
void write_continuous_csv(std::ostream& out, const ContinuousPath& path, std::size_t d);
void write_continuous_paths_csv(std::ostream& out, std::span<const ContinuousPath> paths, std::size_t d);

/// {"path":k,"t":[...],"y":[[...],...],"jump":[0,1,...]}
void write_continuous_jsonl(std::ostream& out, const ContinuousPath& path, std::size_t index);

/// Header `z_1,...,z_d,probability`, lattice states with nonzero mass.
void write_distribution_csv(std::ostream& out, const LatticeDistribution& dist);

}  // namespace imbp
