#pragma once

#include <cstdint>

#include "ctxmotion/motion_model.hpp"
#include "ctxmotion/synthetic.hpp"

namespace fixture {

// Small widths so finite differences over every scalar stay cheap.
inline ctxmotion::ModelConfig reduced_config(ctxmotion::Variant v, std::size_t observed = 3, std::size_t predicted = 4) {
  auto c = ctxmotion::ModelConfig::for_variant(v);
  c.human_hidden = 8;
  c.context_hidden = 4;
  c.interaction_hidden = 3;
  c.observed = observed;
  c.predicted = predicted;
  c.input_scale = 1e-3;
  return c;
}

// The first `observed + predicted` frames of a pick-and-place scene, cut to
// the first `entities` roster entries (human first).
inline ctxmotion::Window toy_window(std::uint64_t seed, std::size_t observed, std::size_t predicted,
                                    std::size_t entities, std::size_t start = 20) {
  ctxmotion::synthetic::ScenarioSpec spec;
  spec.seed = seed;
  spec.noise_mm = 5.0;
  auto [seq, truth] = ctxmotion::synthetic::generate(spec);
  for (auto& f : seq.frames) f.entities.resize(entities);
  ctxmotion::SequenceWindow w{start, start + observed, start + observed + predicted - 1};
  return ctxmotion::extract_window(seq, w);
}

}  // namespace fixture
