#pragma once

#include <string>
#include <vector>

#include "egolab/vocab.hpp"
#include "egolab/world.hpp"

namespace egolab {

// Line-delimited episode dumps: a schema line, a world-parameter line, then
// one record per line with `key=value` fields separated by ';'. Embeddings
// are '/'-separated frames of ','-separated %.17g decimals, so reload is
// bit-exact.

void write_ego_dataset(const std::string& path, const std::vector<EpisodeSample>& eps,
                       const WorldSpec& spec, const Vocabulary& vocab);
std::vector<EpisodeSample> load_ego_dataset(const std::string& path,
                                            const Vocabulary& vocab,
                                            WorldSpec* spec_out = nullptr);

void write_exo_dataset(const std::string& path, const std::vector<ExoSample>& samples,
                       const WorldSpec& spec, const Vocabulary& vocab);
std::vector<ExoSample> load_exo_dataset(const std::string& path, const Vocabulary& vocab,
                                        WorldSpec* spec_out = nullptr);

// Seed-range helpers used by the CLI: train/heldout splits never overlap.
std::vector<EpisodeSample> generate_episodes(uint64_t seed_base, int count,
                                             const WorldSpec& spec);
std::vector<ExoSample> generate_exo_tasks(uint64_t seed_base, int count,
                                          const WorldSpec& spec);

}  // namespace egolab
