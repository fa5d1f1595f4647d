#include "awfnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace awfnet {

void PredictionSet::validate() const {
  if (labels.empty()) throw ContractError("metrics: empty prediction set");
  if (num_classes < 2) throw ContractError("metrics: need at least 2 classes");
  if (probs.size() != static_cast<std::size_t>(n()) * num_classes)
    throw ContractError("metrics: probs size does not match N x C");
  if (positive_class < 0 || positive_class >= num_classes)
    throw ContractError("metrics: positive_class out of range");
  for (int i = 0; i < n(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ContractError("metrics: label " + std::to_string(labels[i]) +
                          " outside [0, " + std::to_string(num_classes) + ")");
    double s = 0;
    for (int c = 0; c < num_classes; ++c)
      s += probs[static_cast<std::size_t>(i) * num_classes + c];
    if (std::abs(s - 1.0) > 1e-5)
      throw ContractError("metrics: probability row " + std::to_string(i) +
                          " sums to " + std::to_string(s));
  }
}

namespace {

int argmax_row(const double* row, int c) {
  int best = 0;
  for (int k = 1; k < c; ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

struct Rate {
  double value = 0;
  bool ok = false;  // false when the denominator was zero
};

Rate ratio(double num, double den) {
  if (den <= 0) return {0.0, false};
  return {num / den, true};
}

}  // namespace

MetricReport classification_metrics(const PredictionSet& p) {
  p.validate();
  const int C = p.num_classes, N = p.n();
  MetricReport r;
  r.num_classes = C;
  r.confusion.assign(static_cast<std::size_t>(C) * C, 0);
  for (int i = 0; i < N; ++i) {
    const int pred = argmax_row(p.probs.data() + static_cast<std::size_t>(i) * C, C);
    ++r.confusion[static_cast<std::size_t>(p.labels[i]) * C + pred];
  }

  long correct = 0;
  for (int c = 0; c < C; ++c) correct += r.confusion[static_cast<std::size_t>(c) * C + c];
  r.acc = static_cast<double>(correct) / N;

  auto row_sum = [&](int c) {
    long s = 0;
    for (int k = 0; k < C; ++k) s += r.confusion[static_cast<std::size_t>(c) * C + k];
    return s;
  };
  auto col_sum = [&](int c) {
    long s = 0;
    for (int k = 0; k < C; ++k) s += r.confusion[static_cast<std::size_t>(k) * C + c];
    return s;
  };

  // b-ACC: mean recall over classes present in the labels.
  double recall_sum = 0;
  int present = 0;
  for (int c = 0; c < C; ++c) {
    const long rs = row_sum(c);
    if (rs == 0) continue;
    ++present;
    recall_sum += static_cast<double>(r.confusion[static_cast<std::size_t>(c) * C + c]) / rs;
  }
  r.b_acc = present > 0 ? recall_sum / present : 0.0;

  if (C == 2) {
    const int pc = p.positive_class, nc = 1 - pc;
    const double tp = static_cast<double>(r.confusion[static_cast<std::size_t>(pc) * 2 + pc]);
    const double fn = static_cast<double>(r.confusion[static_cast<std::size_t>(pc) * 2 + nc]);
    const double fp = static_cast<double>(r.confusion[static_cast<std::size_t>(nc) * 2 + pc]);
    const double tn = static_cast<double>(r.confusion[static_cast<std::size_t>(nc) * 2 + nc]);
    const Rate pr = ratio(tp, tp + fp);
    const Rate se = ratio(tp, tp + fn);
    const Rate sp = ratio(tn, tn + fp);
    const Rate f1 = ratio(2 * pr.value * se.value, pr.value + se.value);
    r.precision = pr.value;
    r.sensitivity = se.value;
    r.specificity = sp.value;
    r.f1 = f1.value;
    r.degenerate = !(pr.ok && se.ok && sp.ok && f1.ok);
  } else {
    // macro averages over classes present in the labels
    double pr = 0, se = 0, sp = 0, f1 = 0;
    bool degenerate = false;
    for (int c = 0; c < C; ++c) {
      const long rs = row_sum(c);
      if (rs == 0) continue;
      const double tp = static_cast<double>(r.confusion[static_cast<std::size_t>(c) * C + c]);
      const double fn = static_cast<double>(rs) - tp;
      const double fp = static_cast<double>(col_sum(c)) - tp;
      const double tn = static_cast<double>(N) - tp - fn - fp;
      const Rate prc = ratio(tp, tp + fp);
      const Rate rec = ratio(tp, tp + fn);
      const Rate spc = ratio(tn, tn + fp);
      const Rate f1c = ratio(2 * prc.value * rec.value, prc.value + rec.value);
      degenerate = degenerate || !(prc.ok && rec.ok && spc.ok && f1c.ok);
      pr += prc.value;
      se += rec.value;
      sp += spc.value;
      f1 += f1c.value;
    }
    r.precision = present > 0 ? pr / present : 0.0;
    r.sensitivity = present > 0 ? se / present : 0.0;
    r.specificity = present > 0 ? sp / present : 0.0;
    r.f1 = present > 0 ? f1 / present : 0.0;
    r.degenerate = degenerate;
  }
  return r;
}

namespace {

// Mann-Whitney AUC from scores with average ranks for ties.
double binary_rank_auc(const std::vector<double>& scores,
                       const std::vector<char>& is_pos) {
  const std::size_t n = scores.size();
  long npos = std::count(is_pos.begin(), is_pos.end(), char(1));
  long nneg = static_cast<long>(n) - npos;
  if (npos == 0 || nneg == 0)
    throw MetricError("auc: only one class present");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double rank_pos_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (is_pos[idx[k]]) rank_pos_sum += avg_rank;
    i = j + 1;
  }
  const double u = rank_pos_sum - 0.5 * static_cast<double>(npos) * (npos + 1);
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

}  // namespace

double auc(const PredictionSet& p) {
  p.validate();
  const int C = p.num_classes, N = p.n();
  if (C == 2) {
    std::vector<double> scores(N);
    std::vector<char> pos(N);
    for (int i = 0; i < N; ++i) {
      scores[i] = p.probs[static_cast<std::size_t>(i) * C + p.positive_class];
      pos[i] = p.labels[i] == p.positive_class ? 1 : 0;
    }
    return binary_rank_auc(scores, pos);
  }
  // macro one-vs-rest over classes present in the labels
  double total = 0;
  int used = 0;
  for (int c = 0; c < C; ++c) {
    long npos = std::count(p.labels.begin(), p.labels.end(), c);
    if (npos == 0 || npos == N) continue;
    std::vector<double> scores(N);
    std::vector<char> pos(N);
    for (int i = 0; i < N; ++i) {
      scores[i] = p.probs[static_cast<std::size_t>(i) * C + c];
      pos[i] = p.labels[i] == c ? 1 : 0;
    }
    total += binary_rank_auc(scores, pos);
    ++used;
  }
  if (used == 0) throw MetricError("auc: fewer than two classes present");
  return total / used;
}

std::pair<double, double> calibration_errors(const PredictionSet& p, int bins) {
  p.validate();
  if (bins < 1) throw ContractError("calibration: bins must be >= 1");
  const int C = p.num_classes, N = p.n();
  std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
  std::vector<long> count(bins, 0);
  for (int i = 0; i < N; ++i) {
    const double* row = p.probs.data() + static_cast<std::size_t>(i) * C;
    const int pred = argmax_row(row, C);
    const double conf = row[pred];
    // equal-width bins over (0,1]: bin m covers ((m-1)/bins, m/bins]
    int b = static_cast<int>(std::ceil(conf * bins)) - 1;
    b = std::min(std::max(b, 0), bins - 1);
    conf_sum[b] += conf;
    acc_sum[b] += pred == p.labels[i] ? 1.0 : 0.0;
    ++count[b];
  }
  double ece = 0, mce = 0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double gap =
        std::abs(acc_sum[b] / count[b] - conf_sum[b] / count[b]);
    ece += gap * static_cast<double>(count[b]) / N;
    mce = std::max(mce, gap);
  }
  return {ece, mce};
}

MetricReport compute_metrics(const PredictionSet& p, int bins) {
  MetricReport r = classification_metrics(p);
  r.auc = auc(p);
  auto [ece, mce] = calibration_errors(p, bins);
  r.ece = ece;
  r.mce = mce;
  r.bin_count = bins;
  return r;
}

const std::vector<std::string>& metric_column_names() {
  static const std::vector<std::string> names = {
      "acc", "precision", "sensitivity", "f1", "specificity",
      "b_acc", "auc", "ece", "mce"};
  return names;
}

std::vector<double> metric_column_values(const MetricReport& r) {
  return {r.acc, r.precision, r.sensitivity, r.f1, r.specificity,
          r.b_acc, r.auc, r.ece, r.mce};
}

}  // namespace awfnet
