#include "guide/grounding.hpp"

#include <algorithm>
#include <cmath>

namespace guide::grounding {

using nn::Mat;
using nn::Vec;

LocationFeatures location_features(const world::WorldConfig& w, const Vec2& p) {
  LocationFeatures f;
  f.x = p.x;
  f.y = p.y;
  f.dist_to_nearest_obstacle =
      w.obstacles.empty() ? 1e3 : std::max(0.0, w.obstacle_surface_distance(p));
  f.region_memberships.reserve(w.regions.size());
  for (const auto& [name, c] : w.regions)
    f.region_memberships.push_back(c.contains(p) ? 1.0 : 0.0);
  f.disturbance_intensity = w.disturbance_intensity(p);
  return f;
}

Item item_of(const taskspec::SubTask& st) { return {taskspec::kind_word(st.kind), st.region_id}; }
Item item_of(const taskspec::Constraint& c) { return {taskspec::kind_word(c.kind), c.region_id}; }

std::size_t token_bucket(std::string_view token) {
  return static_cast<std::size_t>(fnv1a64(token) % GroundingParams::kTableSize);
}

Eigen::VectorXd feature_vector(const LocationFeatures& f) {
  Eigen::VectorXd v(4 + f.region_memberships.size());
  v[0] = f.x;
  v[1] = f.y;
  v[2] = std::min(f.dist_to_nearest_obstacle, 20.0);
  v[3] = f.disturbance_intensity;
  for (std::size_t i = 0; i < f.region_memberships.size(); ++i)
    v[4 + static_cast<int>(i)] = f.region_memberships[i];
  return v;
}

GroundingParams GroundingParams::init(const world::WorldConfig& w, Rng& rng, int d) {
  GroundingParams p;
  const int fw = 4 + static_cast<int>(w.regions.size());
  p.loc_mlp = nn::Mlp<double>::dense({fw, kHidden, d},
                                     {nn::Activation::Tanh, nn::Activation::Identity}, rng);
  p.token_table.resize(kTableSize, d);
  for (int i = 0; i < kTableSize; ++i)
    for (int j = 0; j < d; ++j) p.token_table(i, j) = rng.normal() * 0.1;
  p.feature_scale.resize(fw);
  p.feature_scale[0] = 1.0 / std::max(1.0, w.bounds.width());
  p.feature_scale[1] = 1.0 / std::max(1.0, w.bounds.height());
  p.feature_scale[2] = 1.0 / 20.0;
  p.feature_scale[3] = 1.0;
  for (int i = 4; i < fw; ++i) p.feature_scale[i] = 1.0;
  return p;
}

namespace {

Eigen::VectorXd normalize_checked(const Eigen::VectorXd& z, const char* what) {
  const double n = z.norm();
  if (!std::isfinite(n)) throw NonFiniteOutput(std::string(what) + ": non-finite embedding");
  if (n < 1e-12) throw NonFiniteOutput(std::string(what) + ": zero-norm embedding");
  return z / n;
}

std::vector<std::size_t> item_buckets(const Item& item) {
  return {token_bucket(item.kind_word), token_bucket(item.region_id)};
}

}  // namespace

Embedding embed_location(const LocationFeatures& f, const GroundingParams& p) {
  Eigen::VectorXd x = feature_vector(f);
  if (x.size() != p.feature_width())
    throw nn::ShapeMismatch("embed_location: feature width mismatch");
  Eigen::VectorXd z = nn::forward(p.loc_mlp, Eigen::VectorXd(x.cwiseProduct(p.feature_scale)));
  return normalize_checked(z, "embed_location");
}

Embedding embed_item(const Item& item, const GroundingParams& p) {
  const auto buckets = item_buckets(item);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p.token_table.cols());
  for (auto b : buckets) m += p.token_table.row(static_cast<int>(b)).transpose();
  m /= static_cast<double>(buckets.size());
  return normalize_checked(m, "embed_item");
}

double triplet_loss(const Embedding& a, const Embedding& pos, const Embedding& neg,
                    double margin) {
  const double dp = (a - pos).squaredNorm();
  const double dn = (a - neg).squaredNorm();
  return std::max(0.0, dp - dn + margin);
}

Eigen::VectorXd attention_weights(const Embedding& loc, const std::vector<Embedding>& items,
                                  double temperature) {
  if (items.empty()) throw EmptyItemList();
  const double scale = 1.0 / (temperature * std::sqrt(static_cast<double>(loc.size())));
  Eigen::VectorXd logits(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    logits[static_cast<int>(i)] = loc.dot(items[i]) * scale;
  const double m = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - m).exp();
  return w / w.sum();
}

namespace {

struct MinedItem {
  Item item;
  world::Circle region;
};

// gradient of y = z/|z| : dz = (dy - y*(y.dy)) / |z|
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& dy) {
  return (dy - y * y.dot(dy)) / z.norm();
}

}  // namespace

GroundingParams train_grounding(const world::WorldConfig& w,
                                const std::vector<taskspec::ParsedTask>& tasks,
                                const TrainHp& hp, TrainStats* stats) {
  Rng init_rng = Rng::stream(hp.seed, 0x67726E64);
  GroundingParams p = GroundingParams::init(w, init_rng);

  std::vector<MinedItem> pool;
  auto push_item = [&](const Item& it) {
    for (const auto& m : pool)
      if (m.item == it) return;
    pool.push_back({it, w.region(it.region_id)});
  };
  for (const auto& t : tasks) {
    for (const auto& st : t.subtasks) push_item(item_of(st));
    for (const auto& c : t.constraints) push_item(item_of(c));
  }

  const double fp = std::max(0.5, w.footprint_radius);
  auto positives = [&](const Vec2& a, std::vector<int>& out) {
    out.clear();
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (dist(a, pool[i].region.center()) - pool[i].region.r <= fp)
        out.push_back(static_cast<int>(i));
  };
  auto negatives = [&](const Vec2& a, std::vector<int>& out) {
    out.clear();
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (dist(a, pool[i].region.center()) - pool[i].region.r > 2.0 * fp)
        out.push_back(static_cast<int>(i));
  };

  struct Triplet {
    Vec2 anchor;
    int pos, neg;
  };
  auto mine = [&](Rng& rng, int count, std::vector<Triplet>& out) {
    out.clear();
    std::vector<int> ps, ns;
    int attempts = 0;
    const int max_attempts = 200 * count + 10000;
    while (static_cast<int>(out.size()) < count && attempts < max_attempts) {
      ++attempts;
      Vec2 a{rng.uniform(w.bounds.min_x, w.bounds.max_x),
             rng.uniform(w.bounds.min_y, w.bounds.max_y)};
      positives(a, ps);
      negatives(a, ns);
      if (ps.empty() || ns.empty()) continue;
      out.push_back({a, ps[rng.below(ps.size())], ns[rng.below(ns.size())]});
    }
    if (out.empty()) throw InsufficientTriplets();
  };

  // fixed probe set so initial/final losses are comparable
  Rng probe_rng = Rng::stream(hp.seed, 0x70726F62);
  std::vector<Triplet> probe;
  mine(probe_rng, std::max(64, hp.batch), probe);

  auto mean_loss = [&](const std::vector<Triplet>& batch) {
    double total = 0;
    for (const auto& t : batch) {
      const Embedding a = embed_location(location_features(w, t.anchor), p);
      const Embedding ep = embed_item(pool[t.pos].item, p);
      const Embedding en = embed_item(pool[t.neg].item, p);
      total += triplet_loss(a, ep, en, hp.margin);
    }
    return total / batch.size();
  };

  const double initial = mean_loss(probe);

  nn::Adam<double> opt = nn::Adam<double>::for_net(p.loc_mlp, hp.lr);
  Eigen::MatrixXd tab_m = Eigen::MatrixXd::Zero(p.token_table.rows(), p.token_table.cols());
  Eigen::MatrixXd tab_v = tab_m;
  long tab_t = 0;

  Rng train_rng = Rng::stream(hp.seed, 0x7472616E);
  std::vector<Triplet> batch;
  nn::Grads<double> grads = nn::Grads<double>::zeros_like(p.loc_mlp);
  for (int step = 0; step < hp.steps; ++step) {
    mine(train_rng, hp.batch, batch);
    const int B = static_cast<int>(batch.size());

    Mat<double> X(p.feature_width(), B);
    for (int i = 0; i < B; ++i)
      X.col(i) = feature_vector(location_features(w, batch[i].anchor))
                     .cwiseProduct(p.feature_scale);
    nn::Tape<double> tape;
    nn::forward_batch(p.loc_mlp, X, tape);

    grads.set_zero();
    Eigen::MatrixXd dtab = Eigen::MatrixXd::Zero(p.token_table.rows(), p.token_table.cols());
    Mat<double> dZ = Mat<double>::Zero(p.dim(), B);

    for (int i = 0; i < B; ++i) {
      const Eigen::VectorXd z = tape.output().col(i);
      const Embedding a = normalize_checked(z, "embed_location");
      const auto& pit = pool[batch[i].pos];
      const auto& nit = pool[batch[i].neg];
      const auto pb = item_buckets(pit.item);
      const auto nb = item_buckets(nit.item);
      Eigen::VectorXd pm = Eigen::VectorXd::Zero(p.dim());
      for (auto bidx : pb) pm += p.token_table.row(static_cast<int>(bidx)).transpose();
      pm /= static_cast<double>(pb.size());
      Eigen::VectorXd nm = Eigen::VectorXd::Zero(p.dim());
      for (auto bidx : nb) nm += p.token_table.row(static_cast<int>(bidx)).transpose();
      nm /= static_cast<double>(nb.size());
      const Embedding ep = normalize_checked(pm, "embed_item");
      const Embedding en = normalize_checked(nm, "embed_item");

      const double loss = triplet_loss(a, ep, en, hp.margin);
      if (loss <= 0) continue;
      const double inv_b = 1.0 / B;
      const Eigen::VectorXd da = 2.0 * (en - ep) * inv_b;
      const Eigen::VectorXd dp = 2.0 * (ep - a) * inv_b;
      const Eigen::VectorXd dn = 2.0 * (a - en) * inv_b;

      dZ.col(i) = normalize_backward(z, a, da);
      const Eigen::VectorXd dpm = normalize_backward(pm, ep, dp) / pb.size();
      for (auto bidx : pb) dtab.row(static_cast<int>(bidx)) += dpm.transpose();
      const Eigen::VectorXd dnm = normalize_backward(nm, en, dn) / nb.size();
      for (auto bidx : nb) dtab.row(static_cast<int>(bidx)) += dnm.transpose();
    }

    nn::backward_batch(p.loc_mlp, tape, dZ, grads);
    opt.step(p.loc_mlp, grads);

    ++tab_t;
    const double c1 = 1.0 / (1.0 - std::pow(0.9, static_cast<double>(tab_t)));
    const double c2 = 1.0 / (1.0 - std::pow(0.999, static_cast<double>(tab_t)));
    tab_m = 0.9 * tab_m + 0.1 * dtab;
    tab_v = (0.999 * tab_v.array() + 0.001 * dtab.array().square()).matrix();
    p.token_table.array() -=
        hp.lr * (tab_m.array() * c1) / ((tab_v.array() * c2).sqrt() + 1e-8);
  }

  if (stats) {
    stats->initial_loss = initial;
    stats->final_loss = hp.steps > 0 ? mean_loss(probe) : initial;
  }
  return p;
}

void save_grounding(const GroundingParams& p, const std::string& path) {
  nn::Checkpoint ck;
  ck.kind = "grounding";
  nn::add_mlp(ck, "loc_mlp", p.loc_mlp);
  ck.add("token_table", p.token_table);
  ck.add("feature_scale", p.feature_scale);
  Eigen::MatrixXd temp(1, 1);
  temp(0, 0) = p.attention_temperature;
  ck.add("attention_temperature", temp);
  ck.save(path);
}

GroundingParams load_grounding(const std::string& path) {
  nn::Checkpoint ck = nn::Checkpoint::load(path);
  if (ck.kind != "grounding") throw nn::FormatError("not a grounding checkpoint");
  GroundingParams p;
  p.loc_mlp = nn::get_mlp<double>(ck, "loc_mlp");
  p.token_table = ck.get("token_table");
  p.feature_scale = ck.get("feature_scale");
  p.attention_temperature = ck.get("attention_temperature")(0, 0);
  return p;
}

}  // namespace guide::grounding
