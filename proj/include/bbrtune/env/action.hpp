#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbrtune::env {

struct Windows {
  std::uint32_t rt_ms = 10'000;
  std::uint32_t bw_rounds = 8;

  double rt_seconds() const { return static_cast<double>(rt_ms) / 1000.0; }
  bool operator==(const Windows&) const = default;
};

struct ActionGrid {
  std::vector<double> rt_s = {0.5, 1, 2, 5, 10};
  std::vector<std::uint32_t> bw_rounds = {2, 4, 8, 16, 32};

  std::size_t k_rt() const { return rt_s.size(); }
  std::size_t k_bw() const { return bw_rounds.size(); }

  void validate() const {
    if (rt_s.empty() || bw_rounds.empty()) throw std::invalid_argument("action grid must be non-empty");
    for (std::size_t i = 0; i < rt_s.size(); ++i) {
      if (!(rt_s[i] > 0) || !std::isfinite(rt_s[i])) throw std::invalid_argument("RTprop window options must be > 0");
      if (std::round(rt_s[i] * 1000) < 1 || rt_s[i] * 1000 > 4e9) throw std::invalid_argument("RTprop option out of range");
      if (i && !(rt_s[i] > rt_s[i - 1])) throw std::invalid_argument("RTprop window options must increase");
    }
    for (std::size_t i = 0; i < bw_rounds.size(); ++i) {
      if (bw_rounds[i] < 1) throw std::invalid_argument("BtlBw window options must be >= 1");
      if (i && !(bw_rounds[i] > bw_rounds[i - 1])) throw std::invalid_argument("BtlBw window options must increase");
    }
  }

  Windows decode(std::size_t i_rt, std::size_t i_bw) const {
    if (i_rt >= rt_s.size() || i_bw >= bw_rounds.size())
      throw std::out_of_range("action index (" + std::to_string(i_rt) + "," + std::to_string(i_bw) +
                             ") outside grid");
    return Windows{static_cast<std::uint32_t>(std::llround(rt_s[i_rt] * 1000)), bw_rounds[i_bw]};
  }

  // Grid position of a window pair, if it is on the grid.
  bool index_of(const Windows& w, std::size_t& i_rt, std::size_t& i_bw) const {
    for (i_rt = 0; i_rt < rt_s.size(); ++i_rt)
      if (decode(i_rt, 0).rt_ms == w.rt_ms) break;
    for (i_bw = 0; i_bw < bw_rounds.size(); ++i_bw)
      if (bw_rounds[i_bw] == w.bw_rounds) break;
    return i_rt < rt_s.size() && i_bw < bw_rounds.size();
  }

  bool contains(const Windows& w) const {
    std::size_t a, b;
    return index_of(w, a, b);
  }
};

inline constexpr Windows kVanillaWindows{10'000, 8};

}  // namespace bbrtune::env
