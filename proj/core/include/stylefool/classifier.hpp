#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "stylefool/nn.hpp"
#include "stylefool/rng.hpp"
#include "stylefool/tensor.hpp"

namespace stylefool {

/// The only thing a black-box classifier reveals: its top-1 label and that label's softmax score.
struct Prediction {
  int label = 0;
  double confidence = 0.0;

  bool operator==(const Prediction&) const = default;
};

/// Anything that maps a clip to a Prediction. Implementations must be
/// reentrant; budget accounting happens in query(), not here.
class BlackBox {
 public:
  virtual ~BlackBox() = default;
  virtual Prediction classify(const VideoTensor& video) = 0;
};

/// Hard cap on classifier calls. Thread-safe; `used` never exceeds `limit`.
class QueryBudget {
 public:
  static constexpr std::uint64_t kDefaultLimit = 300'000;

  explicit QueryBudget(std::uint64_t limit = kDefaultLimit, std::uint64_t used = 0);

  std::uint64_t used() const;
  std::uint64_t limit() const noexcept { return limit_; }
  std::uint64_t remaining() const;

  /// Reserves one query slot; false when the budget is spent.
  bool try_acquire();
  /// Returns a slot reserved by try_acquire (transport failure).
  void release();

 private:
  mutable std::mutex mu_;
  std::uint64_t limit_;
  std::uint64_t used_;
};

/// One counted classifier call. Throws BudgetError without contacting the
/// classifier when the budget is exhausted; a QueryError from the transport
/// leaves the count unchanged.
Prediction query(BlackBox& classifier, const VideoTensor& video, QueryBudget& budget);

// ---------------------------------------------------------------------------
// Toy target model

inline constexpr int kToyClasses = 5;
enum class MotionClass : int { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kRotate = 4 };
const char* motion_class_name(int label);

struct LabeledVideo {
  std::string id;
  int label = 0;
  VideoTensor video;
};

/// Balanced synthetic corpus: a saturated shape moving left/right/up/down or a
/// bar rotating in place over a static textured background. 16x32x32x3 clips,
/// labels interleaved (0,1,2,3,4,0,1,...). Ids are "<prefix>NNNN".
std::vector<LabeledVideo> synth_dataset(SeededRng& rng, int per_class,
                                        const std::string& id_prefix = "vid");

/// Per-frame-pair conv net with temporal averaging.
///
/// Each consecutive pair (t, t+1) becomes a 6-channel grid [frame_t,
/// frame_{t+1} - frame_t], is downsampled 2x, passed through three
/// conv3x3-relu-avgpool2 blocks, flattened, averaged over pairs and mapped to
/// class logits by a dense layer. Confidence is the softmax maximum.
class ToyClassifier final : public BlackBox {
 public:
  struct Params {
    std::vector<nn::Conv3x3<double>> convs;
    int dense_in = 0;
    int classes = kToyClasses;
    std::vector<double> dense_weights;  // classes x dense_in, row-major
    std::vector<double> dense_bias;
  };

  ToyClassifier() = default;
  explicit ToyClassifier(Params params);

  /// He-normal initialisation for `height` x `width` inputs.
  static ToyClassifier initialize(SeededRng& rng, int height = 32, int width = 32);

  Prediction classify(const VideoTensor& video) override;
  /// Full softmax distribution (for tests and training diagnostics).
  std::vector<double> probabilities(const VideoTensor& video) const;

  const Params& params() const noexcept { return params_; }
  Params& mutable_params() noexcept { return params_; }

 private:
  Params params_;
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 10;
  double learning_rate = 0.01;
  double min_accuracy = 0.95;
  int max_attempts = 3;
};

struct TrainReport {
  ToyClassifier model;
  double test_accuracy = 0.0;
  int attempts = 0;
};

double accuracy(const ToyClassifier& model, const std::vector<LabeledVideo>& data);

/// Adam + cross-entropy training. Retries from a fresh initialisation (next RNG
/// stream) until held-out accuracy reaches options.min_accuracy, at most
/// options.max_attempts times; otherwise throws TrainingError.
TrainReport train_toy(const std::vector<LabeledVideo>& train, const std::vector<LabeledVideo>& test,
                      SeededRng& rng, const TrainOptions& options = {});

/// TCW1 file: "TCW1", u32 classes, u32 conv count, per conv u32 in, u32 out,
/// weights f64 LE (out,in,3,3), bias f64 LE; then u32 dense_in, weights, bias (f64 LE).
void save_toy(const ToyClassifier& model, const std::filesystem::path& path);
ToyClassifier load_toy(const std::filesystem::path& path);

}  // namespace stylefool
