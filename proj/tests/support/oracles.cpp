#include "oracles.hpp"

#include <cmath>

namespace oracle {

Schema furniture() {
  return {{{"type", {"chair", "sofa", "desk", "fan"}},
           {"colour", {"blue", "red", "green", "grey"}},
           {"size", {"large", "small"}},
           {"orientation", {"left", "right", "front", "back"}}}};
}

std::vector<Object> all_bundles(const Schema& schema) {
  std::vector<Object> out{Object{}};
  for (const auto& [name, values] : schema.attributes) {
    std::vector<Object> next;
    for (const auto& partial : out) {
      for (const auto& v : values) {
        Object b = partial;
        b[name] = v;
        next.push_back(b);
      }
      Object b = partial;
      b[name] = "";
      next.push_back(b);
    }
    out = std::move(next);
  }
  return out;
}

std::size_t count_logic_bundles(const Schema& schema, const std::vector<Object>& objects) {
  std::size_t n = 0;
  for (const auto& b : all_bundles(schema)) {
    bool any = false;
    for (const auto& o : objects) {
      bool fits = true;
      for (const auto& [attr, value] : b)
        if (!value.empty() && o.at(attr) != value) fits = false;
      any = any || fits;
    }
    n += any ? 1 : 0;
  }
  return n;
}

std::string realize(const Object& b) {
  const auto get = [&](const char* k) {
    auto it = b.find(k);
    return it == b.end() ? std::string() : it->second;
  };
  std::string s = "a";
  const std::string size = get("size"), colour = get("colour"), type = get("type"), orient = get("orientation");
  if (!size.empty() && !colour.empty()) {
    s += " " + size + ", " + colour;
  } else if (!size.empty()) {
    s += " " + size;
  } else if (!colour.empty()) {
    s += " " + colour;
  }
  s += " " + (type.empty() ? std::string("thing") : type);
  if (!orient.empty()) s += " facing " + orient;
  return s;
}

std::vector<std::vector<long double>> listener(const std::vector<std::vector<double>>& meaning) {
  std::vector<std::vector<long double>> out;
  for (const auto& row : meaning) {
    long double total = 0;
    for (double v : row) total += v;
    std::vector<long double> r(row.size(), 0.0L);
    if (total > 0)
      for (std::size_t o = 0; o < row.size(); ++o) r[o] = row[o] / total;
    out.push_back(r);
  }
  return out;
}

std::vector<std::vector<long double>> speaker(const std::vector<std::vector<long double>>& listener,
                                              const std::vector<double>& costs, double alpha) {
  const std::size_t n_utt = listener.size();
  const std::size_t n_obj = n_utt ? listener[0].size() : 0;
  std::vector<std::vector<long double>> out(n_utt, std::vector<long double>(n_obj, 0.0L));
  for (std::size_t o = 0; o < n_obj; ++o) {
    long double z = 0;
    for (std::size_t u = 0; u < n_utt; ++u)
      if (listener[u][o] > 0) z += std::pow(listener[u][o] / costs[u], static_cast<long double>(alpha));
    for (std::size_t u = 0; u < n_utt; ++u)
      if (listener[u][o] > 0) out[u][o] = std::pow(listener[u][o] / costs[u], static_cast<long double>(alpha)) / z;
  }
  return out;
}

std::optional<long double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const long double n = static_cast<long double>(xs.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double x = xs[i], y = ys[i];
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const long double vx = n * sxx - sx * sx;
  const long double vy = n * syy - sy * sy;
  if (vx <= 0 || vy <= 0) return std::nullopt;
  return (n * sxy - sx * sy) / std::sqrt(vx * vy);
}

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double x : xs) {
      if (x < xs[i]) ++less;
      if (x == xs[i]) ++equal;
    }
    r[i] = 1.0 + static_cast<double>(less) + (static_cast<double>(equal) - 1.0) / 2.0;
  }
  return r;
}

std::optional<long double> spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson(ranks(xs), ranks(ys));
}

}  // namespace oracle
