#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stylefool/classifier.hpp"

namespace stylefool {

enum class QueryKind { kProbe, kNes, kVerify };
const char* query_kind_name(QueryKind kind);
QueryKind parse_query_kind(const std::string& name);

/// One classifier call as seen by the attacker.
struct QueryEvent {
  std::uint64_t q = 0;  // budget count after this call
  QueryKind kind = QueryKind::kProbe;
  int label = 0;
  double conf = 0.0;
  double eps = 0.0;  // l-inf radius in force when the call was made

  bool operator==(const QueryEvent&) const = default;
};

/// Append-only query log of one video's attack (selection probes included).
class Transcript {
 public:
  void record(QueryKind kind, const Prediction& pred, double eps, std::uint64_t q);
  const std::vector<QueryEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }

  /// JSON lines {"q","kind","label","conf","eps"}.
  void write_jsonl(const std::filesystem::path& path) const;
  static Transcript read_jsonl(const std::filesystem::path& path);

 private:
  std::vector<QueryEvent> events_;
};

/// query() plus a transcript entry. `log` may be null.
Prediction logged_query(BlackBox& classifier, const VideoTensor& video, QueryBudget& budget,
                        QueryKind kind, double eps, Transcript* log);

/// Query accounting rebuilt from a transcript alone.
struct ReplaySummary {
  std::uint64_t total = 0;
  std::uint64_t probes = 0;
  std::uint64_t nes = 0;
  std::uint64_t verifies = 0;
  /// Attack rounds: maximal runs of NES samples followed by their verifies.
  std::uint64_t rounds = 0;
};

/// Throws ValidationError if q is not 1, 2, 3, ... in order, or if an NES run
/// other than a trailing one (cut short by the budget) is not a whole number
/// of `nes_samples`.
ReplaySummary replay(const Transcript& transcript, int nes_samples);

}  // namespace stylefool
