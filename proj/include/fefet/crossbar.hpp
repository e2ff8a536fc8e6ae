#pragma once

// Crossbar of stochastic synapses. Rows are presynaptic inputs, columns are
// postsynaptic neurons. A read gates each row by its spike and sums cell
// conductances down the columns; programming addresses individual cells.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fefet/errors.hpp"
#include "fefet/random.hpp"
#include "fefet/synapse.hpp"

namespace fefet {

struct CellPulse {
  std::size_t row = 0;
  std::size_t col = 0;
  PulseLevel level = PulseLevel::None;
};

class CrossbarArray {
 public:
  CrossbarArray() = default;

  CrossbarArray(std::size_t rows, std::size_t cols, SynapseModel tri_state, SynapseModel binary)
      : rows_(rows),
        cols_(cols),
        state_(rows * cols, static_cast<std::uint8_t>(SynapseState::S0)),
        kind_(rows * cols, static_cast<std::uint8_t>(SynapseKind::TriState)),
        models_{std::move(tri_state), std::move(binary)} {
    detail::require(rows > 0 && cols > 0, "CrossbarArray: dimensions must be positive");
    detail::require(models_[0].kind() == SynapseKind::TriState && models_[1].kind() == SynapseKind::Binary,
                    "CrossbarArray: expects a (TriState, Binary) model pair");
    refresh_weights();
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  SynapseState state(std::size_t r, std::size_t c) const { return static_cast<SynapseState>(state_[at(r, c)]); }
  SynapseKind kind(std::size_t r, std::size_t c) const { return static_cast<SynapseKind>(kind_[at(r, c)]); }
  const SynapseModel& model(SynapseKind k) const noexcept { return models_[static_cast<std::size_t>(k)]; }
  const SynapseModel& model_at(std::size_t r, std::size_t c) const { return model(kind(r, c)); }
  double weight(std::size_t r, std::size_t c) const { return weights_[at(r, c)]; }

  // Row-major raw views, used by checkpoints and equality checks.
  const std::vector<std::uint8_t>& states() const noexcept { return state_; }
  const std::vector<std::uint8_t>& kinds() const noexcept { return kind_; }

  void set_state(std::size_t r, std::size_t c, SynapseState s) {
    detail::require(model_at(r, c).allows(s), "CrossbarArray: state not valid for the cell's model");
    state_[at(r, c)] = static_cast<std::uint8_t>(s);
    weights_[at(r, c)] = model_at(r, c).weight(s);
  }

  // out[j] = sum_i spikes[i] * w(i, j)
  std::vector<double> read(std::span<const std::uint8_t> spikes) const {
    detail::require(spikes.size() == rows_, "CrossbarArray::read: spike vector length must equal rows");
    std::vector<double> out(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      if (spikes[i]) accumulate_row(i, out);
    return out;
  }

  // Same as read() for a list of active row indices; adds into `out`.
  void read_active(std::span<const std::uint32_t> active_rows, std::span<double> out) const {
    detail::require(out.size() == cols_, "CrossbarArray::read_active: output length must equal cols");
    for (auto i : active_rows) {
      detail::require(i < rows_, "CrossbarArray::read_active: row index out of range");
      accumulate_row(i, out);
    }
  }

  // Each addressed cell draws its next state from its own model. Draws are
  // keyed by (key, row, col), so the outcome does not depend on pulse order.
  void program(std::span<const CellPulse> pulses, Rng& rng) {
    for (const auto& p : pulses)
      detail::require(p.row < rows_ && p.col < cols_, "CrossbarArray::program: cell index out of range");
    if (pulses.empty()) return;
    const std::uint64_t key = rng.next_u64();
    for (const auto& p : pulses) program_cell(p.row, p.col, p.level, keyed_uniform(key, p.row, p.col));
  }

  // Programs cell (r, c) with a caller-supplied uniform draw.
  void program_cell(std::size_t r, std::size_t c, PulseLevel level, double u) {
    const std::size_t k = at(r, c);
    const SynapseModel& m = models_[kind_[k]];
    const auto s = static_cast<SynapseState>(state_[k]);
    SynapseState next = s;
    if (level == PulseLevel::Reset) {
      next = SynapseState::S0;
    } else if (level != PulseLevel::None) {
      next = m.next(s, level, u);
    }
    state_[k] = static_cast<std::uint8_t>(next);
    weights_[k] = m.weight(next);
  }

  // Marks exactly round(f * rows * cols) uniformly chosen cells Binary; all
  // others become TriState. Converted cells holding S1 collapse to S0.
  void inject_binary_fraction(double f, Rng& rng) {
    detail::require(f >= 0.0 && f <= 1.0, "inject_binary_fraction: fraction must lie in [0, 1]");
    const std::size_t n = rows_ * cols_;
    const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    std::vector<std::uint32_t> cells(n);
    for (std::size_t i = 0; i < n; ++i) cells[i] = static_cast<std::uint32_t>(i);
    // partial Fisher-Yates: the first k entries are a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.index(n - i));
      std::swap(cells[i], cells[j]);
    }
    std::fill(kind_.begin(), kind_.end(), static_cast<std::uint8_t>(SynapseKind::TriState));
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = cells[i];
      kind_[c] = static_cast<std::uint8_t>(SynapseKind::Binary);
      if (state_[c] == static_cast<std::uint8_t>(SynapseState::S1)) state_[c] = static_cast<std::uint8_t>(SynapseState::S0);
    }
    refresh_weights();
  }

  std::size_t count(SynapseState s) const {
    return static_cast<std::size_t>(std::count(state_.begin(), state_.end(), static_cast<std::uint8_t>(s)));
  }

  std::size_t count_in_column(std::size_t c, SynapseState s) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows_; ++r) n += state_[at(r, c)] == static_cast<std::uint8_t>(s);
    return n;
  }

  std::size_t count_kind(SynapseKind k) const {
    return static_cast<std::size_t>(std::count(kind_.begin(), kind_.end(), static_cast<std::uint8_t>(k)));
  }

  // Restores a checkpoint body. Sizes and per-cell validity are checked.
  void assign(std::vector<std::uint8_t> states, std::vector<std::uint8_t> kinds) {
    detail::require(states.size() == rows_ * cols_ && kinds.size() == rows_ * cols_,
                    "CrossbarArray::assign: size mismatch");
    for (std::size_t i = 0; i < states.size(); ++i) {
      detail::require(states[i] < kStates && kinds[i] < 2, "CrossbarArray::assign: invalid cell code");
      detail::require(models_[kinds[i]].allows(static_cast<SynapseState>(states[i])),
                      "CrossbarArray::assign: state not valid for the cell's model");
    }
    state_ = std::move(states);
    kind_ = std::move(kinds);
    refresh_weights();
  }

  bool operator==(const CrossbarArray& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && state_ == o.state_ && kind_ == o.kind_;
  }

 private:
  std::size_t at(std::size_t r, std::size_t c) const {
    detail::require(r < rows_ && c < cols_, "CrossbarArray: cell index out of range");
    return r * cols_ + c;
  }

  void accumulate_row(std::size_t i, std::span<double> out) const {
    const double* w = weights_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) out[j] += w[j];
  }

  void refresh_weights() {
    weights_.resize(state_.size());
    for (std::size_t k = 0; k < state_.size(); ++k)
      weights_[k] = models_[kind_[k]].weight(static_cast<SynapseState>(state_[k]));
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> state_;
  std::vector<std::uint8_t> kind_;
  std::vector<double> weights_;  // cached conductances, row-major
  std::array<SynapseModel, 2> models_{};
};

// Column weights as a grid of tile_h x tile_w images (binary PGM). Rows of
// the array are the pixels of one tile.
inline std::string encode_weight_pgm(const CrossbarArray& arr, std::size_t tile_h, std::size_t tile_w,
                                     const std::string& comment = {}) {
  detail::require(tile_h * tile_w == arr.rows(), "encode_weight_pgm: tile size must match the row count");
  std::size_t grid = 1;
  while (grid * grid < arr.cols()) ++grid;
  const std::size_t height = grid * tile_h, width = grid * tile_w;
  std::string img(height * width, '\0');
  for (std::size_t c = 0; c < arr.cols(); ++c) {
    const std::size_t gy = c / grid, gx = c % grid;
    for (std::size_t r = 0; r < arr.rows(); ++r) {
      const std::size_t y = gy * tile_h + r / tile_w, x = gx * tile_w + r % tile_w;
      img[y * width + x] = static_cast<char>(std::lround(arr.weight(r, c) * 255.0));
    }
  }
  std::string out = "P5\n";
  if (!comment.empty()) out += "# " + comment + "\n";
  out += std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  return out + img;
}

}  // namespace fefet
