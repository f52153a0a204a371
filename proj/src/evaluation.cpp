#include "polysed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "polysed/csv.hpp"

namespace polysed {
namespace {

void check_shapes(const TargetRoll& pred, const TargetRoll& truth) {
  if (pred.n_frames() != truth.n_frames() || pred.n_classes() != truth.n_classes()) {
    throw InvalidInput("prediction and ground truth rolls differ in shape");
  }
}

Tallies row_tallies(const TargetRoll& pred, const TargetRoll& truth, Eigen::Index t) {
  Tallies c;
  for (Eigen::Index k = 0; k < pred.n_classes(); ++k) {
    const bool p = pred.values(t, k) != 0;
    const bool d = truth.values(t, k) != 0;
    c.tp += p && d;
    c.fp += p && !d;
    c.fn += !p && d;
  }
  return c;
}

double per_frame_sum(const TargetRoll& pred, const TargetRoll& truth) {
  double sum = 0.0;
  for (Eigen::Index t = 0; t < pred.n_frames(); ++t) sum += row_tallies(pred, truth, t).f1();
  return sum;
}

}  // namespace

double Tallies::f1() const {
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double framewise_f1(const TargetRoll& pred, const TargetRoll& truth) {
  check_shapes(pred, truth);
  if (pred.n_frames() == 0) return 1.0;
  return per_frame_sum(pred, truth) / static_cast<double>(pred.n_frames());
}

Tallies frame_tallies(const TargetRoll& pred, const TargetRoll& truth) {
  check_shapes(pred, truth);
  Tallies total;
  for (Eigen::Index t = 0; t < pred.n_frames(); ++t) total += row_tallies(pred, truth, t);
  return total;
}

double framewise_micro_f1(const TargetRoll& pred, const TargetRoll& truth) {
  return frame_tallies(pred, truth).f1();
}

Eigen::Index frames_per_block(double frame_hop_s, double block_s) {
  if (!(frame_hop_s > 0.0) || !(block_s > 0.0)) throw InvalidInput("block and hop durations must be positive");
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(block_s / frame_hop_s)));
}

Tallies block_tallies(const TargetRoll& pred, const TargetRoll& truth, double frame_hop_s, double block_s) {
  check_shapes(pred, truth);
  const Eigen::Index block = frames_per_block(frame_hop_s, block_s);
  Tallies total;
  for (Eigen::Index start = 0; start < pred.n_frames(); start += block) {
    const Eigen::Index len = std::min(block, pred.n_frames() - start);
    for (Eigen::Index k = 0; k < pred.n_classes(); ++k) {
      const bool p = pred.values.col(k).segment(start, len).any();
      const bool d = truth.values.col(k).segment(start, len).any();
      total.tp += p && d;
      total.fp += p && !d;
      total.fn += !p && d;
    }
  }
  return total;
}

double block_f1(const TargetRoll& pred, const TargetRoll& truth, double frame_hop_s, double block_s) {
  return block_tallies(pred, truth, frame_hop_s, block_s).f1();
}

EvalReport evaluate_contexts(std::span<const RecordingOutcome> outcomes, const EvalOptions& options) {
  EvalReport report;
  std::map<std::string, std::size_t> index;
  std::vector<double> frame_sums;
  for (const auto& rec : outcomes) {
    auto [it, inserted] = index.emplace(rec.context_id, report.contexts.size());
    if (inserted) {
      report.contexts.push_back({rec.context_id});
      frame_sums.push_back(0.0);
    }
    auto& ctx = report.contexts[it->second];
    ctx.frame += frame_tallies(rec.pred, rec.truth);
    ctx.block += block_tallies(rec.pred, rec.truth, rec.frame_hop_s, options.block_s);
    ctx.n_frames += rec.pred.n_frames();
    ctx.n_recordings += 1;
    frame_sums[it->second] += per_frame_sum(rec.pred, rec.truth);
  }
  for (std::size_t c = 0; c < report.contexts.size(); ++c) {
    auto& ctx = report.contexts[c];
    if (options.framewise == FramewiseMode::per_frame_mean) {
      ctx.f1_avgframe = ctx.n_frames == 0 ? 1.0 : frame_sums[c] / static_cast<double>(ctx.n_frames);
    } else {
      ctx.f1_avgframe = ctx.frame.f1();
    }
    ctx.f1_1sec = ctx.block.f1();
    report.f1_avgframe += ctx.f1_avgframe;
    report.f1_1sec += ctx.f1_1sec;
  }
  if (!report.contexts.empty()) {
    report.f1_avgframe /= static_cast<double>(report.contexts.size());
    report.f1_1sec /= static_cast<double>(report.contexts.size());
  }
  return report;
}

EvalReport average_reports(std::span<const EvalReport> reports) {
  EvalReport avg;
  if (reports.empty()) return avg;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> counts;
  for (const auto& r : reports) {
    for (const auto& ctx : r.contexts) {
      auto [it, inserted] = index.emplace(ctx.context_id, avg.contexts.size());
      if (inserted) {
        avg.contexts.push_back({ctx.context_id});
        counts.push_back(0);
      }
      auto& a = avg.contexts[it->second];
      a.f1_avgframe += ctx.f1_avgframe;
      a.f1_1sec += ctx.f1_1sec;
      a.frame += ctx.frame;
      a.block += ctx.block;
      a.n_frames += ctx.n_frames;
      a.n_recordings += ctx.n_recordings;
      counts[it->second] += 1;
    }
    avg.f1_avgframe += r.f1_avgframe;
    avg.f1_1sec += r.f1_1sec;
  }
  for (std::size_t c = 0; c < avg.contexts.size(); ++c) {
    avg.contexts[c].f1_avgframe /= static_cast<double>(counts[c]);
    avg.contexts[c].f1_1sec /= static_cast<double>(counts[c]);
  }
  avg.f1_avgframe /= static_cast<double>(reports.size());
  avg.f1_1sec /= static_cast<double>(reports.size());
  return avg;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os << "context,f1_avgframe,f1_1sec\n";
  for (const auto& ctx : report.contexts) {
    os << ctx.context_id << ',' << csv::format_double(ctx.f1_avgframe) << ',' << csv::format_double(ctx.f1_1sec)
       << '\n';
  }
  os << "average," << csv::format_double(report.f1_avgframe) << ',' << csv::format_double(report.f1_1sec) << '\n';
}

std::string format_report_table(const EvalReport& report) {
  std::size_t width = 7;
  for (const auto& ctx : report.contexts) width = std::max(width, ctx.context_id.size());
  std::ostringstream os;
  char line[256];
  auto rule = [&] { os << std::string(width + 26, '-') << '\n'; };
  std::snprintf(line, sizeof line, "%-*s  %11s  %11s\n", static_cast<int>(width), "", "F1_AvgFram", "F1_1-sec");
  rule();
  os << line;
  rule();
  for (const auto& ctx : report.contexts) {
    std::snprintf(line, sizeof line, "%-*s  %10.1f%%  %10.1f%%\n", static_cast<int>(width), ctx.context_id.c_str(),
                  100.0 * ctx.f1_avgframe, 100.0 * ctx.f1_1sec);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-*s  %10.1f%%  %10.1f%%\n", static_cast<int>(width), "average",
                100.0 * report.f1_avgframe, 100.0 * report.f1_1sec);
  os << line;
  rule();
  return os.str();
}

}  // namespace polysed
