#include "stylefool/transcript.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "stylefool/error.hpp"

namespace stylefool {

const char* query_kind_name(QueryKind kind) {
  switch (kind) {
    case QueryKind::kProbe: return "probe";
    case QueryKind::kNes: return "nes";
    case QueryKind::kVerify: return "verify";
  }
  return "probe";
}

QueryKind parse_query_kind(const std::string& name) {
  if (name == "probe") return QueryKind::kProbe;
  if (name == "nes") return QueryKind::kNes;
  if (name == "verify") return QueryKind::kVerify;
  throw FormatError("unknown query kind '" + name + "'");
}

void Transcript::record(QueryKind kind, const Prediction& pred, double eps, std::uint64_t q) {
  events_.push_back({q, kind, pred.label, pred.confidence, eps});
}

void Transcript::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& e : events_) {
    nlohmann::ordered_json j;
    j["q"] = e.q;
    j["kind"] = query_kind_name(e.kind);
    j["label"] = e.label;
    j["conf"] = e.conf;
    j["eps"] = e.eps;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Transcript Transcript::read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  Transcript t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      t.events_.push_back({j.at("q").get<std::uint64_t>(),
                           parse_query_kind(j.at("kind").get<std::string>()),
                           j.at("label").get<int>(), j.at("conf").get<double>(),
                           j.at("eps").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return t;
}

Prediction logged_query(BlackBox& classifier, const VideoTensor& video, QueryBudget& budget,
                        QueryKind kind, double eps, Transcript* log) {
  const Prediction p = query(classifier, video, budget);
  if (log) log->record(kind, p, eps, budget.used());
  return p;
}

ReplaySummary replay(const Transcript& transcript, int nes_samples) {
  if (nes_samples < 1) throw ValidationError("replay needs a positive NES sample count");
  ReplaySummary s;
  std::uint64_t nes_run = 0;
  auto close_run = [&](std::size_t at) {
    if (nes_run == 0) return;
    if (nes_run % static_cast<std::uint64_t>(nes_samples) != 0) {
      throw ValidationError("NES run ending at event " + std::to_string(at) + " has " +
                            std::to_string(nes_run) + " samples");
    }
    s.rounds += nes_run / static_cast<std::uint64_t>(nes_samples);
    nes_run = 0;
  };
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const auto& e = transcript.events()[i];
    if (e.q != i + 1) {
      throw ValidationError("transcript event " + std::to_string(i) + " has q=" +
                            std::to_string(e.q) + ", expected " + std::to_string(i + 1));
    }
    switch (e.kind) {
      case QueryKind::kProbe: close_run(i); ++s.probes; break;
      case QueryKind::kNes: ++nes_run; ++s.nes; break;
      case QueryKind::kVerify: close_run(i); ++s.verifies; break;
    }
  }
  // A budget stop can cut the last estimate short; its samples still count.
  if (nes_run % static_cast<std::uint64_t>(nes_samples) != 0) nes_run -= nes_run % nes_samples;
  close_run(transcript.size());
  s.total = transcript.size();
  return s;
}

}  // namespace stylefool
