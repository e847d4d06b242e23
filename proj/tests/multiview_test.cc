/*
 * Copyright 2026 The CDL Sentinel Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "cdl_sentinel/dataset.h"
#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/kernels.h"
#include "cdl_sentinel/multiview.h"

namespace cdl_sentinel {
namespace {

const std::vector<size_t> kDefaultHidden{64};

std::vector<MultiViewSample> random_samples(size_t n, size_t views, InputShape shape,
                                            size_t classes, uint64_t seed) {
  Rng rng(seed);
  std::vector<MultiViewSample> out(n);
  for (auto& s : out) {
    s.views.resize(views);
    for (auto& v : s.views) {
      v.resize(shape.size());
      for (double& px : v) px = rng.uniform();
    }
    s.label = rng.below(classes);
    s.confidences.assign(views, 1.0);
  }
  return out;
}

TEST(BuildModel, SameSeedIsBitIdentical) {
  const auto a = build_model(4, 10, InputShape{}, kDefaultHidden, 42);
  const auto b = build_model(4, 10, InputShape{}, kDefaultHidden, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(flatten_parameters(a), flatten_parameters(b));
  const auto c = build_model(4, 10, InputShape{}, kDefaultHidden, 43);
  EXPECT_NE(flatten_parameters(a), flatten_parameters(c));
}

TEST(BuildModel, SingleViewHeadReadsOneBranch) {
  const auto m = build_model(1, 10, InputShape{}, kDefaultHidden, 1);
  EXPECT_EQ(m.head.front().in_dim(), 64u);
  EXPECT_EQ(m.head.back().out_dim(), 10u);
}

TEST(BuildModel, DefaultParameterCountMatchesClosedForm) {
  // Branch 256 -> 64: 256*64 + 64 = 16448, four of them; head 256 -> 10:
  // 2560 + 10 = 2570.
  const auto m = build_model(4, 10, InputShape{}, kDefaultHidden, 1);
  EXPECT_EQ(param_count(m), 4u * 16448u + 2570u);
  EXPECT_EQ(param_count(m), 68362u);
  EXPECT_EQ(flatten_parameters(m).size(), 68362u);
}

TEST(BuildModel, InvariantsOverRandomSizes) {
  Rng rng(3);
  for (int t = 0; t < 25; ++t) {
    const size_t views = 1 + rng.below(5);
    const size_t classes = 2 + rng.below(9);
    const InputShape shape{1 + rng.below(2), 2 + rng.below(5), 2 + rng.below(5)};
    std::vector<size_t> hidden{2 + rng.below(8)};
    if (rng.below(2) == 1) hidden.push_back(2 + rng.below(8));
    const auto m = build_model(views, classes, shape, hidden, t);
    for (const auto& br : m.branches) EXPECT_EQ(br.front().in_dim(), shape.size());
    EXPECT_EQ(m.head.front().in_dim(), views * hidden.back());
    EXPECT_EQ(m.head.back().out_dim(), classes);
  }
}

TEST(BuildModel, RejectsBadSizes) {
  EXPECT_THROW(build_model(0, 10, InputShape{}, kDefaultHidden, 1), ConfigError);
  EXPECT_THROW(build_model(4, 0, InputShape{}, kDefaultHidden, 1), ConfigError);
  EXPECT_THROW(build_model(4, 10, InputShape{0, 16, 16}, kDefaultHidden, 1), ConfigError);
  EXPECT_THROW(build_model(4, 10, InputShape{}, std::vector<size_t>{}, 1), ConfigError);
}

TEST(FormBatch, UnitConfidencesConcatenateRawViews) {
  const InputShape shape{};
  const auto samples = random_samples(8, 4, shape, 10, 5);
  const auto batch = form_batch(samples, shape);
  const std::array<size_t, 5> dims{8, 4, 1, 16, 16};
  EXPECT_EQ(batch.dims(), dims);
  EXPECT_EQ(batch.labels.size(), 8u);
  for (size_t s = 0; s < 8; ++s) {
    EXPECT_EQ(batch.labels[s], samples[s].label);
    for (size_t v = 0; v < 4; ++v) {
      const auto view = batch.view(s, v);
      EXPECT_TRUE(std::equal(view.begin(), view.end(), samples[s].views[v].begin()));
    }
  }
}

TEST(FormBatch, ZeroConfidenceZeroesThatView) {
  const InputShape shape{1, 4, 4};
  auto samples = random_samples(3, 3, shape, 4, 6);
  samples[1].confidences[2] = 0.0;
  samples[2].confidences[0] = 0.5;
  const auto batch = form_batch(samples, shape);
  for (double px : batch.view(1, 2)) EXPECT_EQ(px, 0.0);
  const auto half = batch.view(2, 0);
  for (size_t i = 0; i < half.size(); ++i) {
    EXPECT_DOUBLE_EQ(half[i], 0.5 * samples[2].views[0][i]);
  }
}

TEST(FormBatch, RejectsWrongViewSize) {
  const InputShape shape{1, 4, 4};
  auto samples = random_samples(2, 2, shape, 3, 7);
  samples[1].views[1].pop_back();
  EXPECT_ANY_THROW(form_batch(samples, shape));
}

TEST(ForwardMv, ZeroModelGivesUniformOutput) {
  const InputShape shape{1, 4, 4};
  const auto m = zeroed(build_model(3, 7, shape, std::vector<size_t>{5}, 1));
  const auto batch = form_batch(random_samples(4, 3, shape, 7, 8), shape);
  for (const auto& p : forward_mv(m, batch)) {
    for (double v : p) EXPECT_DOUBLE_EQ(v, 1.0 / 7.0);
  }
}

TEST(ForwardMv, SingleViewEqualsBranchThenHead) {
  const InputShape shape{1, 5, 5};
  const auto m = build_model(1, 4, shape, std::vector<size_t>{6}, 9);
  const auto batch = form_batch(random_samples(1, 1, shape, 4, 10), shape);
  const auto mv = forward_mv(m, batch);
  const auto feat = forward(m.branches[0], batch.view(0, 0)).output();
  const auto direct = forward(m.head, feat).output();
  EXPECT_EQ(mv[0], direct);
}

TEST(ForwardMv, ParallelMatchesSerialBitForBit) {
  const InputShape shape{};
  const auto m = build_model(4, 10, shape, kDefaultHidden, 12);
  const auto batch = form_batch(random_samples(64, 4, shape, 10, 13), shape);
  const int saved = kernels::thread_cap();
  for (int threads : {1, 2, 4}) {
    kernels::set_thread_cap(threads);
    EXPECT_EQ(forward_mv(m, batch), forward_mv_serial(m, batch));
    EXPECT_EQ(predict(m, batch), predict_serial(m, batch));
  }
  kernels::set_thread_cap(saved);
}

TEST(ForwardMv, PermutingSamplesPermutesOutputs) {
  const InputShape shape{1, 6, 6};
  const auto m = build_model(2, 5, shape, std::vector<size_t>{8}, 14);
  auto samples = random_samples(10, 2, shape, 5, 15);
  const auto base = forward_mv(m, form_batch(samples, shape));
  std::vector<size_t> perm(samples.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(16);
  rng.shuffle(std::span<size_t>(perm));
  std::vector<MultiViewSample> shuffled;
  for (size_t i : perm) shuffled.push_back(samples[i]);
  const auto out = forward_mv(m, form_batch(shuffled, shape));
  for (size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(out[i], base[perm[i]]);
}

TEST(BackpropMv, MatchesCentralDifferences) {
  const InputShape shape{1, 3, 3};
  const auto m = build_model(2, 3, shape, std::vector<size_t>{4}, 17);
  const auto batch = form_batch(random_samples(1, 2, shape, 3, 18), shape);
  const GradientSet g = backprop_mv(m, batch, 0);
  Network flat = flat_layers(m);
  const double h = 1e-6;
  double worst = 0.0;
  auto loss = [&](const Network& layers) {
    MultiViewModel probe = m;
    assign_flat_layers(probe, layers);
    return mean_loss(probe, batch);
  };
  for (size_t k = 0; k < flat.size(); ++k) {
    for (size_t i = 0; i < flat[k].weights.data.size(); ++i) {
      double& w = flat[k].weights.data[i];
      const double saved = w;
      w = saved + h;
      const double up = loss(flat);
      w = saved - h;
      const double down = loss(flat);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = g[k].weights.data[i];
      worst = std::max(worst, std::abs(a - numeric) /
                                  std::max({std::abs(a), std::abs(numeric), 1e-8}));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(SingleBranch, OneViewSubModelIsWholeModel) {
  const auto m = build_model(1, 10, InputShape{}, kDefaultHidden, 19);
  EXPECT_EQ(param_count(activate_single_branch(m, 0)), param_count(m));
}

TEST(SingleBranch, DefaultFractionAtMostFortyPercent) {
  // 16448 for the branch plus a 64 -> 10 head (650) over 68362.
  const auto m = build_model(4, 10, InputShape{}, kDefaultHidden, 20);
  const auto sub = activate_single_branch(m, 2);
  EXPECT_EQ(param_count(sub), 17098u);
  EXPECT_LE(static_cast<double>(param_count(sub)) / static_cast<double>(param_count(m)),
            0.40);
  EXPECT_EQ(sub.view_indices, std::vector<size_t>{2});
  EXPECT_EQ(sub.branches[0], m.branches[2]);
  EXPECT_EQ(sub.head.back().biases, m.head.back().biases);
}

TEST(SingleBranch, RestrictedGradientsFitSubModel) {
  const InputShape shape{1, 4, 4};
  const auto m = build_model(3, 4, shape, std::vector<size_t>{5}, 21);
  const auto batch = form_batch(random_samples(2, 3, shape, 4, 22), shape);
  const auto g = backprop_mv(m, batch, 1);
  const auto sub = activate_single_branch(m, 1);
  const auto rg = restrict_gradients_to_branch(m, g, 1);
  EXPECT_NO_THROW(check_gradient_shapes(flat_layers(sub), rg));
  MultiViewModel stepped = sub;
  EXPECT_NO_THROW(apply_sgd(stepped, rg, 0.1));
}

TEST(Training, LearnsSyntheticTask) {
  DatasetSpec spec;
  SyntheticSource source(spec, 77);
  const auto train = form_batch(make_samples(source, 300, 1), spec.shape);
  const auto test = form_batch(make_samples(source, 200, 2), spec.shape);
  auto m = build_model(4, 10, spec.shape, kDefaultHidden, 3);
  Rng rng(4);
  const double before = mean_loss(m, train);
  for (int e = 0; e < 10; ++e) train_pass(m, train, 0.1, rng);
  EXPECT_LT(mean_loss(m, train), before);
  EXPECT_GE(accuracy(m, test), 0.95);
}

}  // namespace
}  // namespace cdl_sentinel
