#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"

namespace spiketile {

inline constexpr const char* kNetworkFormatTag = "spiketile-network";
inline constexpr const char* kStimulusFormatTag = "spiketile-stimulus";

inline nlohmann::ordered_json network_to_json(const NetworkGraph& g) {
  nlohmann::ordered_json j;
  j["format"] = kNetworkFormatTag;
  j["version"] = 1;
  j["neuron_count"] = g.neuron_count;
  j["threshold"] = g.threshold;
  j["beta"] = g.beta;
  j["input_ids"] = g.input_ids;
  j["output_ids"] = g.output_ids;
  auto& syn = j["synapses"] = nlohmann::ordered_json::array();
  for (const Synapse& s : g.synapses) syn.push_back({s.pre, s.post, s.weight});
  return j;
}

inline NetworkGraph network_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kNetworkFormatTag)
      throw ParseError("network: format tag is not \"" + std::string(kNetworkFormatTag) + "\"");
    if (j.at("version").get<int>() != 1)
      throw ParseError("network: unsupported version " + j.at("version").dump());
    std::vector<Synapse> synapses;
    for (const auto& row : j.at("synapses")) {
      if (!row.is_array() || row.size() != 3)
        throw ParseError("network: synapse entries must be [pre, post, weight]");
      synapses.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<double>()});
    }
    return NetworkGraph::make(j.at("neuron_count").get<int>(), std::move(synapses),
                              j.at("input_ids").get<std::vector<int>>(),
                              j.at("output_ids").get<std::vector<int>>(),
                              j.at("threshold").get<double>(), j.at("beta").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("network: " + std::string(e.what()));
  }
}

inline void save_network(const NetworkGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << network_to_json(g).dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

inline NetworkGraph load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

/// A stimulus file pairs the injection plan with the neurons it drives, so a
/// compiled program can be exercised without the original network file.
struct StimulusFile {
  StimulusPlan plan;
  std::vector<int> input_ids;

  friend bool operator==(const StimulusFile&, const StimulusFile&) = default;
};

inline nlohmann::ordered_json stimulus_to_json(const StimulusFile& s) {
  if (s.plan.width != static_cast<int>(s.input_ids.size()))
    throw ContractError("stimulus: plan width does not match input_ids");
  nlohmann::ordered_json j;
  j["format"] = kStimulusFormatTag;
  j["version"] = 1;
  j["horizon"] = s.plan.horizon;
  j["input_ids"] = s.input_ids;
  auto& inj = j["injections"] = nlohmann::ordered_json::array();
  for (int t = 0; t < s.plan.horizon; ++t)
    for (int k = 0; k < s.plan.width; ++k)
      if (s.plan.at(t, k) != 0.0) inj.push_back({t, k, s.plan.at(t, k)});
  return j;
}

inline StimulusFile stimulus_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kStimulusFormatTag)
      throw ParseError("stimulus: format tag is not \"" + std::string(kStimulusFormatTag) +
                       "\"");
    if (j.at("version").get<int>() != 1)
      throw ParseError("stimulus: unsupported version " + j.at("version").dump());
    StimulusFile s;
    s.input_ids = j.at("input_ids").get<std::vector<int>>();
    int horizon = j.at("horizon").get<int>();
    if (horizon < 0) throw ParseError("stimulus: negative horizon");
    s.plan = StimulusPlan::zeros(horizon, static_cast<int>(s.input_ids.size()));
    for (const auto& row : j.at("injections")) {
      if (!row.is_array() || row.size() != 3)
        throw ParseError("stimulus: injection entries must be [timestep, slot, value]");
      int t = row[0].get<int>();
      int k = row[1].get<int>();
      if (t < 0 || t >= horizon || k < 0 || k >= s.plan.width)
        throw ParseError("stimulus: injection at (" + std::to_string(t) + ", " +
                         std::to_string(k) + ") outside horizon x width");
      s.plan.at(t, k) = row[2].get<double>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("stimulus: " + std::string(e.what()));
  }
}

inline void save_stimulus(const StimulusFile& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << stimulus_to_json(s).dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

inline StimulusFile load_stimulus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return stimulus_from_json(j);
}

}  // namespace spiketile
