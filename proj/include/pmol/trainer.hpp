//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_TRAINER_HPP
#define PMOL_TRAINER_HPP

#include <functional>
#include <string>
#include <vector>

#include "pmol/denoiser.hpp"
#include "pmol/schedule.hpp"

namespace pmol {

struct LossWeights {
  double position = 1.0;
  double atoms = 1.0;
  double bonds = 1.0;
};

// One corrupted training example.  With center_eps the position noise is
// projected to zero column mean so noised coordinates stay in the centered
// gauge; bond draws are mirrored across the diagonal (row-major upper
// triangle drawn first).
struct NoisyDraw {
  int t = 0;
  Mat eps;  // n x 3
  DenseState noisy;
};

NoisyDraw make_noisy_draw(const NoiseSchedule& schedule,
                          const DenseState& clean, int t, Rng& rng,
                          bool center_eps = true);

struct DiffusionLossValues {
  double total = 0.0;
  double position = 0.0;  // mean squared coordinate error of pred_P0
  double atoms = 0.0;     // mean atom cross entropy
  double bonds = 0.0;     // mean off-diagonal bond cross entropy
};

struct DiffusionLossGraph {
  ad::Var total;
  DiffusionLossValues parts;
};

// Builds the tape from the noisy input through the model to the scalar
// loss.  Callers own the tape (through `p`) and run backward themselves.
DiffusionLossGraph diffusion_loss_graph(const DenoiserModel& model,
                                        nn::TapeBinding& p,
                                        const DenseState& clean,
                                        const NoisyDraw& draw,
                                        const LossWeights& weights);

struct TrainConfig {
  int epochs = 8;
  int batch_size = 16;  // gradients are averaged over the batch
  nn::AdamConfig adam;
  LossWeights weights;
};

struct EpochStats {
  int epoch = 0;
  DiffusionLossValues mean_loss;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

std::vector<EpochStats> train_diffusion(DenoiserModel& model,
                                        const NoiseSchedule& schedule,
                                        const std::vector<DenseState>& train,
                                        const TrainConfig& config, Rng& rng,
                                        const EpochCallback& on_epoch = {});

// Checkpoint directory layout: config.json (widths, step count, schedule
// kind, category marginals), params.bin (named dense arrays), metrics.csv.
void save_denoiser_checkpoint(const std::string& dir,
                              const DenoiserModel& model,
                              const NoiseSchedule& schedule,
                              const std::vector<EpochStats>& history);

struct LoadedDenoiser {
  DenoiserModel model;
  NoiseSchedule schedule;
};

LoadedDenoiser load_denoiser_checkpoint(const std::string& dir);

}  // namespace pmol

#endif  // PMOL_TRAINER_HPP
