#pragma once

#include "lima/envelope.hpp"
#include "lima/estimate.hpp"
#include "lima/geometry.hpp"
#include "lima/pattern.hpp"
#include "lima/simulate.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lima::io {

namespace fs = std::filesystem;

/// One parsed CSV table; `lines` holds the 1-based source line of each row.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;

    /// Column index by name, or nullopt.
    [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const;
};

/// Reads a comma-separated file with a header row. Blank lines are skipped.
/// Errors carry "file:line:" prefixes.
[[nodiscard]] CsvTable read_csv(const fs::path& path);
[[nodiscard]] CsvTable parse_csv(const std::string& text, const std::string& source);

/// Parses a finite double; throws InputError naming the source line on failure.
[[nodiscard]] double parse_double(const std::string& text, const CsvTable& table, std::size_t row);

/// Shortest text that reads back to the same double.
[[nodiscard]] std::string format_double(double v);

[[nodiscard]] Window read_window(const fs::path& path);
void write_window(const fs::path& path, const Window& window);

/// Network with the external ids of its nodes and edges.
struct NetworkFiles {
    std::shared_ptr<const LinearNetwork> network;
    std::vector<std::string> node_ids;
    std::vector<std::string> edge_ids;
    std::map<std::string, std::size_t> edge_index;
};

[[nodiscard]] NetworkFiles read_network(const fs::path& nodes, const fs::path& edges);
void write_network(const fs::path& nodes, const fs::path& edges, const NetworkFiles& net);

/// Planar pattern with `x,y,mark` or `x,y,t_<v>...` columns; an optional
/// `region` column is ignored. Without a window the bounding box of the points
/// is used.
[[nodiscard]] MarkedPointPattern read_planar_pattern(const fs::path& path, const std::optional<Window>& window);
/// Network pattern with `segment,offset,mark` or `segment,offset,t_<v>...`.
[[nodiscard]] MarkedPointPattern read_network_pattern(const fs::path& path, const NetworkFiles& net);

/// Writes the pattern in the schema read_*_pattern expects; `regions` adds a
/// region column, `edge_ids` names network segments.
void write_pattern(const fs::path& path, const MarkedPointPattern& pattern,
                   const std::vector<Region>* regions = nullptr, const std::vector<std::string>* edge_ids = nullptr);

/// Bounding box of the points as a window (slightly padded if degenerate).
[[nodiscard]] Window bounding_window(const std::vector<Point2>& points);

void write_curve_csv(const fs::path& path, const SummaryCurve& curve);
void write_surface_csv(const fs::path& path, const PointwiseSurface& surface);
void write_envelope_csv(const fs::path& path, const EnvelopeResult& env);
void write_report_csv(const fs::path& path, const LocalTestReport& report);
void write_records_csv(const fs::path& path, const std::vector<ReplicateRecord>& records);

[[nodiscard]] nlohmann::ordered_json to_json(const CurveMeta& meta);
[[nodiscard]] nlohmann::ordered_json to_json(const SummaryCurve& curve);
[[nodiscard]] nlohmann::ordered_json to_json(const EnvelopeResult& env);
[[nodiscard]] nlohmann::ordered_json to_json(const LocalTestReport& report);
[[nodiscard]] nlohmann::ordered_json to_json(const StudySummary& summary);

/// Writes JSON with a trailing newline; doubles use round-trip precision.
void write_json(const fs::path& path, const nlohmann::ordered_json& j);
void write_text(const fs::path& path, const std::string& text);
[[nodiscard]] std::string read_text(const fs::path& path);

} // namespace lima::io
