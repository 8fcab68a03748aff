// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/lossmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "liftseg/error.hpp"

namespace liftseg {

namespace {

void same_length(std::size_t a, std::size_t b, const char* what) {
  require(a == b, ErrorKind::kShape,
          std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b) +
              " differ");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LossResult bce_loss(std::span<const double> logits, std::span<const double> targets) {
  same_length(logits.size(), targets.size(), "bce_loss");
  require(!logits.empty(), ErrorKind::kEmptyInput, "bce_loss on empty input");
  const double n = static_cast<double>(logits.size());
  LossResult out{0.0, std::vector<double>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    const double t = targets[i];
    // max(x,0) - x t + log(1 + exp(-|x|))
    out.loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    out.grad[i] = (sigmoid(x) - t) / n;
  }
  out.loss /= n;
  return out;
}

LossResult dice_loss(std::span<const double> probs, std::span<const double> targets,
                     double smooth) {
  same_length(probs.size(), targets.size(), "dice_loss");
  require(smooth > 0.0, ErrorKind::kConfig, "dice smoothing must be positive");
  double inter = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    inter += probs[i] * targets[i];
    total += probs[i] + targets[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = total + smooth;
  LossResult out{1.0 - num / den, std::vector<double>(probs.size())};
  for (std::size_t i = 0; i < probs.size(); ++i)
    out.grad[i] = -(2.0 * targets[i] * den - num) / (den * den);
  return out;
}

LossResult confidence_loss(std::span<const double> pred_conf,
                           std::span<const double> actual_iou) {
  same_length(pred_conf.size(), actual_iou.size(), "confidence_loss");
  require(!pred_conf.empty(), ErrorKind::kEmptyInput, "confidence_loss on empty input");
  const double n = static_cast<double>(pred_conf.size());
  LossResult out{0.0, std::vector<double>(pred_conf.size())};
  for (std::size_t i = 0; i < pred_conf.size(); ++i) {
    const double diff = pred_conf[i] - actual_iou[i];
    out.loss += diff * diff;
    out.grad[i] = 2.0 * diff / n;
  }
  out.loss /= n;
  return out;
}

ContrastiveResult contrastive_alignment(const Matrix& query_embeds,
                                        std::span<const double> text_pooled,
                                        const std::vector<bool>& positives, double temperature) {
  const std::size_t m = query_embeds.rows();
  const std::size_t d = query_embeds.cols();
  same_length(d, text_pooled.size(), "contrastive_alignment width");
  same_length(m, positives.size(), "contrastive_alignment positives");
  require(temperature > 0.0, ErrorKind::kConfig, "temperature must be positive");
  const auto n_pos = static_cast<double>(std::count(positives.begin(), positives.end(), true));
  if (n_pos == 0.0) fail(ErrorKind::kUndefinedLoss, "contrastive loss needs a positive query");

  double t_norm = 0.0;
  for (double v : text_pooled) t_norm += v * v;
  t_norm = std::sqrt(t_norm);
  require(t_norm > 0.0, ErrorKind::kUndefinedLoss, "text embedding has zero norm");

  std::vector<double> q_norm(m);
  std::vector<double> cosine(m);
  std::vector<double> logit(m);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    double nn = 0.0;
    double qt = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      nn += query_embeds(i, c) * query_embeds(i, c);
      qt += query_embeds(i, c) * text_pooled[c];
    }
    q_norm[i] = std::sqrt(nn);
    require(q_norm[i] > 0.0, ErrorKind::kUndefinedLoss, "query embedding has zero norm");
    cosine[i] = qt / (q_norm[i] * t_norm);
    logit[i] = cosine[i] / temperature;
    peak = std::max(peak, logit[i]);
  }
  double z = 0.0;
  for (double l : logit) z += std::exp(l - peak);
  const double log_z = peak + std::log(z);

  ContrastiveResult out{0.0, Matrix(m, d), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    if (positives[i]) out.loss -= (logit[i] - log_z) / n_pos;
  }
  for (std::size_t i = 0; i < m; ++i) {
    // d loss / d logit_i = softmax_i - [positive_i] / P
    const double g = (std::exp(logit[i] - log_z) - (positives[i] ? 1.0 / n_pos : 0.0)) / temperature;
    for (std::size_t c = 0; c < d; ++c) {
      const double q = query_embeds(i, c);
      const double t = text_pooled[c];
      out.grad_queries(i, c) = g * (t / (q_norm[i] * t_norm) - cosine[i] * q / (q_norm[i] * q_norm[i]));
      out.grad_text[c] += g * (q / (q_norm[i] * t_norm) - cosine[i] * t / (t_norm * t_norm));
    }
  }
  return out;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  same_length(a.size(), b.size(), "iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string_view to_string(TargetCategory category) {
  switch (category) {
    case TargetCategory::kZero: return "ZT";
    case TargetCategory::kSingle: return "ST";
    case TargetCategory::kMulti: return "MT";
  }
  return "?";
}

TargetCategory parse_category(std::string_view text) {
  if (text == "ZT") return TargetCategory::kZero;
  if (text == "ST") return TargetCategory::kSingle;
  if (text == "MT") return TargetCategory::kMulti;
  fail(ErrorKind::kValidation, "unknown target category '" + std::string(text) + "'");
}

void validate(const EvalRecord& record) {
  require(record.prediction.size() == record.ground_truth.size(), ErrorKind::kValidation,
          "record " + record.sample_id + ": prediction and ground truth differ in length");
  const bool gt_empty = std::none_of(record.ground_truth.begin(), record.ground_truth.end(),
                                     [](std::uint8_t v) { return v != 0; });
  require(gt_empty == (record.category == TargetCategory::kZero), ErrorKind::kValidation,
          "record " + record.sample_id + ": category ZT must coincide with empty ground truth");
}

namespace {

// Sorting first makes the mean independent of record order.
MetricSummary summarize(std::vector<double> ious, const std::vector<double>& thresholds) {
  std::sort(ious.begin(), ious.end());
  MetricSummary s;
  s.count = ious.size();
  for (double k : thresholds) s.acc[k] = 0.0;
  if (ious.empty()) return s;
  for (double v : ious) {
    s.miou += v;
    for (double k : thresholds) s.acc[k] += v >= k ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ious.size());
  s.miou /= n;
  for (auto& [k, v] : s.acc) v /= n;
  return s;
}

}  // namespace

EvalReport evaluate(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds) {
  require(!records.empty(), ErrorKind::kEmptyInput, "evaluate needs at least one record");
  EvalReport report;
  report.per_record_iou.resize(records.size());
  for (const EvalRecord& r : records) validate(r);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
    const EvalRecord& r = records[static_cast<std::size_t>(i)];
    report.per_record_iou[static_cast<std::size_t>(i)] = iou(r.prediction, r.ground_truth);
  }

  std::map<TargetCategory, std::vector<double>> by_cat;
  std::map<TargetCategory, std::map<bool, std::vector<double>>> by_dist;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EvalRecord& r = records[i];
    by_cat[r.category].push_back(report.per_record_iou[i]);
    if (r.category != TargetCategory::kMulti)
      by_dist[r.category][r.has_distractor].push_back(report.per_record_iou[i]);
  }
  report.overall = summarize(report.per_record_iou, thresholds);
  for (const auto& [cat, v] : by_cat) report.by_category[cat] = summarize(v, thresholds);
  for (const auto& [cat, split] : by_dist)
    for (const auto& [flag, v] : split) report.by_distractor[cat][flag] = summarize(v, thresholds);
  return report;
}

}  // namespace liftseg
