#pragma once

#include "qasched/dynamics.hpp"
#include "qasched/ising.hpp"
#include "qasched/schedule.hpp"
#include "qasched/spectral.hpp"
#include "qasched/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace qasched {

/// printf("%.17g"): round-trips every double.
std::string format_real(double value);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
/// Two-space indented JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

nlohmann::json to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& value);

/// {n, topology, h, j: [[i, j, value]...], seed}; masked entries are listed
/// in `masked_edges` / `masked_spins` when present.
nlohmann::json to_json(const IsingInstance& instance);
/// Throws FormatError on malformed input and ConfigError on values that are
/// off the parameter grid or edges the topology does not admit.
IsingInstance instance_from_json(const nlohmann::json& value);

/// {kind, t_f, epsilon, s}.
nlohmann::json to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& value);
/// Columns t,s.
std::string schedule_csv(const Schedule& schedule);

/// {s, gaps, matel, flags}; missing gaps are written as null.
nlohmann::json to_json(const SpectralProfile& profile);

/// Scalar metrics plus, when `with_trace`, the trace arrays.
nlohmann::json to_json(const AnnealResult& result, bool with_trace);
/// Columns t,s,ground_prob,gap.
std::string result_csv(const AnnealResult& result);

/// JSON lines: a header object with the layout and record count, then one
/// {features, target, t_f, meta} object per record.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

/// Columns epoch,train_mse,val_mse,train_mre,val_mre.
std::string history_csv(const std::vector<EpochMetrics>& history);

}  // namespace qasched
