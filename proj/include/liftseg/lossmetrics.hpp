// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_LOSSMETRICS_HPP
#define LIFTSEG_LOSSMETRICS_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liftseg/tensor.hpp"

namespace liftseg {

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

struct ContrastiveResult {
  double loss = 0.0;
  Matrix grad_queries;            // m x D
  std::vector<double> grad_text;  // D
};

LossResult bce_loss(std::span<const double> logits, std::span<const double> targets);
LossResult dice_loss(std::span<const double> probs, std::span<const double> targets,
                     double smooth = 1.0);
LossResult confidence_loss(std::span<const double> pred_conf,
                           std::span<const double> actual_iou);
ContrastiveResult contrastive_alignment(const Matrix& query_embeds,
                                        std::span<const double> text_pooled,
                                        const std::vector<bool>& positives,
                                        double temperature = 0.07);

/// |a & b| / |a | b|; two empty masks score 1.
double iou(const BinaryMask& a, const BinaryMask& b);

enum class TargetCategory { kZero, kSingle, kMulti };

std::string_view to_string(TargetCategory category);
TargetCategory parse_category(std::string_view text);

struct EvalRecord {
  std::string sample_id;
  BinaryMask prediction;
  BinaryMask ground_truth;
  TargetCategory category = TargetCategory::kSingle;
  bool has_distractor = false;
};

void validate(const EvalRecord& record);

struct MetricSummary {
  std::size_t count = 0;
  double miou = 0.0;
  std::map<double, double> acc;  // threshold -> fraction with IoU >= threshold
};

struct EvalReport {
  MetricSummary overall;
  std::map<TargetCategory, MetricSummary> by_category;
  // Keyed by category (ZT, ST) then has_distractor.
  std::map<TargetCategory, std::map<bool, MetricSummary>> by_distractor;
  std::vector<double> per_record_iou;
};

EvalReport evaluate(const std::vector<EvalRecord>& records,
                    const std::vector<double>& thresholds = {0.25, 0.5});

}  // namespace liftseg

#endif  // LIFTSEG_LOSSMETRICS_HPP
