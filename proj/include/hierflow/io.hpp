// Copyright 2026 The Hierflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Text formats. Every JSON document carries "schema": 1.

#ifndef HIERFLOW_IO_HPP
#define HIERFLOW_IO_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierflow/fit.hpp"
#include "hierflow/graph.hpp"
#include "hierflow/hierarchy.hpp"
#include "hierflow/model.hpp"

namespace hierflow::io {

inline constexpr int kSchemaVersion = 1;

/// Newick with ultrametric branch lengths (parent height minus child
/// height) and the exact merge height of every internal vertex as a
/// `[&height=...]` comment. Children are written in canonical order.
std::string to_newick(const Hierarchy& hier, std::span<const std::string> ids);

struct NewickTree {
  Hierarchy hierarchy;
  std::vector<std::string> ids;  // leaf index -> id
};

/// Parses to_newick output or plain ultrametric Newick (heights derived
/// from branch lengths when the comment is absent). With `order` the leaf
/// set must equal it and leaves take its indices; otherwise leaves are
/// indexed in order of appearance.
NewickTree parse_newick(std::string_view text,
                        std::span<const std::string> order = {},
                        std::vector<double> ladder = {});

std::string to_dot(const Hierarchy& hier, std::span<const std::string> ids);

struct PartitionDocument {
  Partition partition;
  std::vector<std::string> ids;
  bool exact = true;
};

std::string partition_to_json(const PartitionDocument& doc);
PartitionDocument partition_from_json(std::string_view text);
std::string partition_to_csv(const PartitionDocument& doc);
/// Point features for nodes with coordinates; null geometry otherwise.
std::string partition_to_geojson(const PartitionDocument& doc,
                                 const std::vector<NodeRecord>& nodes);

/// Everything needed to re-evaluate or resample a fitted model.
struct ModelDocument {
  std::vector<std::string> ids;
  ModelParams params;
  std::optional<Hierarchy> hierarchy;
  DistanceMatrix distances;
  std::optional<BinSpec> bins;
  std::vector<double> ladder;
  ObjectiveSpec objective;
  std::optional<FitMode> mode;
  std::optional<double> objective_value;
};

std::string model_to_json(const ModelDocument& doc);
/// Distances may be omitted, which means the single-bin unit matrix.
ModelDocument model_from_json(std::string_view text);

std::string config_to_json(const FitConfig& cfg);
std::string report_to_json(const FitReport& report, const FitConfig& cfg,
                           std::span<const std::string> ids);
/// One row per accepted move: sweep, kind, levels, gain, objective and the
/// ';'-joined ids of the moved and target leaves.
std::string moves_to_csv(const FitReport& report, std::span<const std::string> ids);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace hierflow::io

#endif  // HIERFLOW_IO_HPP
