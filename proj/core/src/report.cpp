#include "rsagame/analysis.hpp"

#include "rsagame/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace rsagame {

namespace {

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : "n/a"; }

std::string alpha_label(double alpha) { return fmt::format("{:g}", alpha); }

void write_file(const std::filesystem::path& path, const std::string& content, EmittedFiles& emitted) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw Error(fmt::format("write failed for '{}'", path.string()));
  emitted.files.push_back(path);
}

std::string svg_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kLogicColour = "#d62728";
constexpr const char* kTopkColour = "#1f77b4";
constexpr const char* kAllColour = "#7f7f7f";

}  // namespace

void write_records_tsv(std::ostream& out, const std::vector<ScoreRecord>& records,
                       const std::string& manifest_hash) {
  out << "# manifest_sha256=" << manifest_hash << '\n';
  out << "game_id\tobject_index\tutterance\tprovenance\tcost\tllm_logprob\tllm_prob_norm\tmf_kind\talpha\trsa_prob\n";
  for (const auto& r : records) {
    for (const auto& [key, prob] : r.rsa) {
      out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.game_id, r.object_index, r.utterance,
                         to_string(r.provenance), r.cost, r.llm_logprob, r.llm_prob_norm, to_string(key.mf),
                         key.alpha, prob);
    }
  }
}

std::string summary_table(const AlphaReport& report, bool target_only) {
  std::string out = fmt::format("# alpha={} llm_score_mode={} grouping={}\n", alpha_label(report.alpha),
                                to_string(report.mode), target_only ? "game-target" : "game-object");
  out += "utterance_type\trsa_mf\tpcc_mean\tpcc_sd\tsrcc_mean\tsrcc_sd\tgroups_used\tgroups_skipped\n";
  const std::pair<ProvenanceFilter, const char*> rows[] = {
      {ProvenanceFilter::logic, "Logic"}, {ProvenanceFilter::topk, "Top-k"}, {ProvenanceFilter::all, "All"}};
  for (const auto& [filter, label] : rows) {
    for (MfKind mf : {MfKind::prompt, MfKind::rule}) {
      const auto* g = report.find_group(mf, filter, target_only);
      const char* mf_label = mf == MfKind::prompt ? "Prompt-based" : "Rule-based";
      if (!g) {
        out += fmt::format("{}\t{}\tn/a\tn/a\tn/a\tn/a\t0\t0\n", label, mf_label);
        continue;
      }
      out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", label, mf_label, cell(g->pcc.mean), cell(g->pcc.sd),
                         cell(g->srcc.mean), cell(g->srcc.sd), g->pcc.used, g->pcc.skipped);
    }
  }
  return out;
}

std::string alpha_pcc_table(const std::vector<AlphaReport>& reports) {
  std::string out = "alpha\trsa_mf\tpcc_topk\tpcc_logic\tpcc_all\n";
  for (const auto& r : reports) {
    for (MfKind mf : {MfKind::prompt, MfKind::rule}) {
      const auto get = [&](ProvenanceFilter f) -> std::optional<double> {
        const auto* c = r.find_overall(mf, f);
        return c ? c->pcc : std::nullopt;
      };
      if (!r.find_overall(mf, ProvenanceFilter::all) && !r.find_overall(mf, ProvenanceFilter::logic)) continue;
      out += fmt::format("{}\t{}\t{}\t{}\t{}\n", alpha_label(r.alpha), to_string(mf),
                         cell(get(ProvenanceFilter::topk)), cell(get(ProvenanceFilter::logic)),
                         cell(get(ProvenanceFilter::all)));
    }
  }
  return out;
}

std::string scatter_svg(const OverallCorrelation& c, const std::string& manifest_hash) {
  constexpr double kW = 480, kH = 360, kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;
  const auto [xmin_it, xmax_it] = std::minmax_element(c.rsa_scores.begin(), c.rsa_scores.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(c.llm_scores.begin(), c.llm_scores.end());
  double xmin = c.rsa_scores.empty() ? 0.0 : std::min(0.0, *xmin_it);
  double xmax = c.rsa_scores.empty() ? 1.0 : *xmax_it;
  double ymin = c.llm_scores.empty() ? 0.0 : *ymin_it;
  double ymax = c.llm_scores.empty() ? 1.0 : *ymax_it;
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * (kW - kLeft - kRight); };
  const auto sy = [&](double y) { return kH - kBottom - (y - ymin) / (ymax - ymin) * (kH - kTop - kBottom); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<!-- manifest_sha256={} -->\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kW, kH, kW, kH, manifest_hash);
  svg += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", kW / 2,
                     svg_escape(fmt::format("{} MF, alpha={}, {}: PCC={} SRCC={} (n={})", to_string(c.mf),
                                            alpha_label(c.alpha), to_string(c.filter), cell(c.pcc),
                                            cell(c.srcc), c.rows)));
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
      kLeft, kH - kBottom, kW - kRight, kTop);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">RSA speaker probability "
                     "[{:.3g}, {:.3g}]</text>\n",
                     (kLeft + kW - kRight) / 2, kH - 15, xmin, xmax);
  svg += fmt::format("<text x=\"14\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
                     "{})\">LLM score ({}) [{:.3g}, {:.3g}]</text>\n",
                     (kTop + kH - kBottom) / 2, (kTop + kH - kBottom) / 2, to_string(c.mode), ymin, ymax);
  svg += "<g fill-opacity=\"0.5\">\n";
  for (std::size_t i = 0; i < c.rows; ++i) {
    svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\"/>\n", sx(c.rsa_scores[i]),
                       sy(c.llm_scores[i]),
                       c.provenance[i] == Provenance::logic ? kLogicColour : kTopkColour);
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

std::string histogram_svg(const AlphaReport& report, MfKind mf, bool srcc, const std::string& manifest_hash) {
  constexpr double kW = 480, kH = 300, kLeft = 40, kRight = 20, kTop = 30, kBottom = 40;
  const std::pair<ProvenanceFilter, const char*> series[] = {{ProvenanceFilter::all, kAllColour},
                                                             {ProvenanceFilter::logic, kLogicColour},
                                                             {ProvenanceFilter::topk, kTopkColour}};
  std::size_t peak = 1;
  std::size_t bins = 0;
  for (const auto& [filter, colour] : series) {
    if (const auto* g = report.find_group(mf, filter)) {
      const auto& h = srcc ? g->srcc.histogram : g->pcc.histogram;
      bins = std::max(bins, h.size());
      for (auto v : h) peak = std::max(peak, v);
    }
  }
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<!-- manifest_sha256={} -->\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kW, kH, kW, kH, manifest_hash);
  svg += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">{} per (game, object), {} "
                     "MF, alpha={}</text>\n",
                     kW / 2, srcc ? "SRCC" : "PCC", to_string(mf), alpha_label(report.alpha));
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, kH - kBottom,
                     kW - kRight);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\">-1</text>\n", kLeft - 6, kH - kBottom + 14);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\">1</text>\n", kW - kRight - 4, kH - kBottom + 14);
  if (bins > 0) {
    const double bar = (kW - kLeft - kRight) / static_cast<double>(bins);
    for (const auto& [filter, colour] : series) {
      const auto* g = report.find_group(mf, filter);
      if (!g) continue;
      const auto& h = srcc ? g->srcc.histogram : g->pcc.histogram;
      svg += fmt::format("<g fill=\"{}\" fill-opacity=\"0.45\">\n", colour);
      for (std::size_t b = 0; b < h.size(); ++b) {
        if (h[b] == 0) continue;
        const double height = static_cast<double>(h[b]) / static_cast<double>(peak) * (kH - kTop - kBottom);
        svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\"/>\n",
                           kLeft + bar * static_cast<double>(b), kH - kBottom - height, bar, height);
      }
      svg += "</g>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

EmittedFiles emit_report(const std::vector<AlphaReport>& reports, const std::vector<ScoreRecord>& records,
                         const std::filesystem::path& out_dir, const std::string& manifest_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "plots");
  EmittedFiles emitted;

  {
    std::ostringstream tsv;
    write_records_tsv(tsv, records, manifest_hash);
    write_file(out_dir / "records.tsv", tsv.str(), emitted);
  }

  nlohmann::ordered_json summary;
  summary["manifest_sha256"] = manifest_hash;
  summary["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) summary["reports"].push_back(to_json(r));
  write_file(out_dir / "summary.json", summary.dump(2) + "\n", emitted);

  std::string summary_text = fmt::format("# manifest_sha256={}\n", manifest_hash);
  std::string summary_target = summary_text;
  for (const auto& r : reports) {
    summary_text += summary_table(r);
    summary_target += summary_table(r, true);
  }
  write_file(out_dir / "summary.tsv", summary_text, emitted);
  write_file(out_dir / "summary_target_only.tsv", summary_target, emitted);
  write_file(out_dir / "alpha_pcc.tsv",
             fmt::format("# manifest_sha256={}\n{}", manifest_hash, alpha_pcc_table(reports)), emitted);

  for (const auto& r : reports) {
    for (const auto& c : r.overall) {
      if (c.filter != ProvenanceFilter::all) continue;
      write_file(out_dir / "plots" / fmt::format("scatter_{}_alpha{}.svg", to_string(c.mf), alpha_label(c.alpha)),
                 scatter_svg(c, manifest_hash), emitted);
    }
    for (MfKind mf : {MfKind::prompt, MfKind::rule}) {
      if (!r.find_group(mf, ProvenanceFilter::all) && !r.find_group(mf, ProvenanceFilter::logic)) continue;
      for (bool srcc : {false, true}) {
        write_file(out_dir / "plots" /
                       fmt::format("hist_{}_{}_alpha{}.svg", srcc ? "srcc" : "pcc", to_string(mf), alpha_label(r.alpha)),
                   histogram_svg(r, mf, srcc, manifest_hash), emitted);
      }
    }
  }
  return emitted;
}

}  // namespace rsagame
