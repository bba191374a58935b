// Copyright 2026 The BiCoRec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bicorec/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bicorec/rng.hpp"

namespace bicorec {

namespace {

/// Inverse-CDF sampler over ranks 1..size with P(r) proportional to r^-s.
class ZipfSampler {
 public:
  ZipfSampler(int size, double exponent) : cumulative_(static_cast<std::size_t>(size)) {
    double total = 0.0;
    for (int r = 1; r <= size; ++r) {
      total += std::pow(static_cast<double>(r), -exponent);
      cumulative_[static_cast<std::size_t>(r - 1)] = total;
    }
    for (auto& c : cumulative_) c /= total;
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform();
    int lo = 0, hi = static_cast<int>(cumulative_.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cumulative_[static_cast<std::size_t>(mid)] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;  // 0-based rank
  }

 private:
  std::vector<double> cumulative_;
};

std::string item_name(int index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "i%0*d", width, index);
  return buf;
}

int digits(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (user_count < 1 || item_count < 2)
    throw std::invalid_argument("SyntheticSpec: need users and at least two items");
  if (zipf_exponent <= 0.0)
    throw std::invalid_argument("SyntheticSpec: zipf_exponent must be > 0");
  if (drift < 0.0 || drift > 1.0)
    throw std::invalid_argument("SyntheticSpec: drift must be in [0, 1]");
  if (popular_start_prob <= 0.0 || popular_start_prob >= 1.0)
    throw std::invalid_argument("SyntheticSpec: popular_start_prob must be in (0, 1)");
  if (head_fraction <= 0.0 || head_fraction >= 1.0)
    throw std::invalid_argument("SyntheticSpec: head_fraction must be in (0, 1)");
  if (min_len < 1 || max_len < min_len)
    throw std::invalid_argument("SyntheticSpec: bad sequence-length band");
  if (aux_dim < 1) throw std::invalid_argument("SyntheticSpec: aux_dim must be >= 1");
}

std::string generate_synthetic_tsv(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, "synth");

  const int head =
      static_cast<int>(std::ceil(spec.head_fraction * spec.item_count));
  const int tail = spec.item_count - head;
  const ZipfSampler head_sampler(head, spec.zipf_exponent);
  const ZipfSampler tail_sampler(tail, spec.zipf_exponent);
  const int width = digits(spec.item_count);
  const int user_width = digits(spec.user_count);

  std::ostringstream out;
  out << "# synthetic drift corpus: users=" << spec.user_count
      << " items=" << spec.item_count << " drift=" << spec.drift
      << " seed=" << spec.seed << "\n";
  for (int u = 1; u <= spec.user_count; ++u) {
    const int len =
        spec.min_len +
        static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
    char user_buf[32];
    std::snprintf(user_buf, sizeof(user_buf), "u%0*d", user_width, u);
    double p_popular = spec.popular_start_prob;
    for (int t = 1; t <= len; ++t) {
      int item;
      if (rng.uniform() < p_popular) {
        item = 1 + head_sampler.sample(rng);  // items 1..head are the head
      } else {
        item = head + 1 + tail_sampler.sample(rng);
      }
      out << user_buf << '\t' << item_name(item, width) << '\t' << t << '\n';
      p_popular *= 1.0 - spec.drift;
    }
  }
  return out.str();
}

std::string generate_synthetic_aux_tsv(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, "synth-aux");
  const int head =
      static_cast<int>(std::ceil(spec.head_fraction * spec.item_count));
  const int width = digits(spec.item_count);

  std::ostringstream out;
  for (int item = 1; item <= spec.item_count; ++item) {
    out << item_name(item, width) << '\t';
    const double center = item <= head ? 0.5 : -0.5;
    for (int j = 0; j < spec.aux_dim; ++j) {
      const double v = center + 0.1 * rng.normal();
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << buf;
      if (j + 1 < spec.aux_dim) out << ',';
    }
    out << '\n';
  }
  return out.str();
}

void write_synthetic(const SyntheticSpec& spec,
                     const std::string& interactions_path,
                     const std::string& aux_path) {
  {
    std::ofstream out(interactions_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_synthetic: cannot write " +
                                       interactions_path);
    out << generate_synthetic_tsv(spec);
  }
  if (!aux_path.empty()) {
    std::ofstream out(aux_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_synthetic: cannot write " + aux_path);
    out << generate_synthetic_aux_tsv(spec);
  }
}

}  // namespace bicorec
