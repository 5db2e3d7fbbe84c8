#include "copulahmm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "copulahmm/error.hpp"
#include "copulahmm/serialize.hpp"
#include "copulahmm/csv.hpp"

namespace copulahmm {

namespace {

std::string where(const std::filesystem::path& p, std::size_t line) {
  return p.filename().string() + ":" + std::to_string(line) + ": ";
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long> parse_long(const std::string& s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Symptom cell: missing marker, empty, or an integer in [0, max].
std::optional<int> parse_symptom(const std::string& cell, int max, const std::string& missing,
                                 const std::string& what, const std::string& loc) {
  if (cell.empty() || cell == missing) return std::nullopt;
  auto v = parse_long(cell);
  if (!v) {
    // "3.0" is accepted, "3.5" is not.
    auto d = parse_double(cell);
    if (!d || std::floor(*d) != *d)
      throw InputError(loc + what + " value '" + cell + "' is not an integer");
    v = static_cast<long>(*d);
  }
  if (*v < 0 || *v > max)
    throw InputError(loc + what + " value out of range: " + cell + " not in [0, " +
                     std::to_string(max) + "]");
  return static_cast<int>(*v);
}

}  // namespace

Eigen::Index ColumnSpec::width() const {
  switch (kind) {
    case ColumnKind::numeric:
    case ColumnKind::binary:
      return 1;
    case ColumnKind::categorical:
      return std::max<Eigen::Index>(0, static_cast<Eigen::Index>(levels.size()) - 1);
  }
  return 0;
}

Eigen::Index RiskFactorEncoding::width() const {
  Eigen::Index w = 0;
  for (const auto& c : columns) w += c.width();
  return w;
}

std::vector<std::string> RiskFactorEncoding::encoded_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::categorical) {
      for (std::size_t l = 1; l < c.levels.size(); ++l) names.push_back(c.name + "=" + c.levels[l]);
    } else {
      names.push_back(c.name);
    }
  }
  return names;
}

Eigen::VectorXd RiskFactorEncoding::encode_row(const std::vector<std::string>& raw) const {
  if (raw.size() != columns.size())
    throw InputError("expected " + std::to_string(columns.size()) + " risk factors, got " +
                     std::to_string(raw.size()));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(width());
  Eigen::Index j = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c];
    const auto& v = raw[c];
    switch (col.kind) {
      case ColumnKind::numeric: {
        auto d = parse_double(v);
        if (!d) throw InputError("column '" + col.name + "': '" + v + "' is not a number");
        x[j++] = *d;
        break;
      }
      case ColumnKind::binary: {
        const std::vector<std::string> def{"0", "1"};
        const auto& lv = col.levels.size() == 2 ? col.levels : def;
        if (v == lv[0]) {
          x[j++] = 0.0;
        } else if (v == lv[1]) {
          x[j++] = 1.0;
        } else {
          throw InputError("column '" + col.name + "': '" + v + "' is not one of {" + lv[0] +
                           ", " + lv[1] + "}");
        }
        break;
      }
      case ColumnKind::categorical: {
        auto it = std::find(col.levels.begin(), col.levels.end(), v);
        if (it == col.levels.end())
          throw InputError("column '" + col.name + "': unknown level '" + v + "'");
        const auto level = it - col.levels.begin();
        if (level > 0) x[j + level - 1] = 1.0;
        j += col.width();
        break;
      }
    }
  }
  return x;
}

std::vector<std::string> RiskFactorEncoding::decode_row(const Eigen::VectorXd& raw) const {
  std::vector<std::string> out;
  Eigen::Index j = 0;
  for (const auto& col : columns) {
    switch (col.kind) {
      case ColumnKind::numeric:
        out.push_back(format_double(raw[j++]));
        break;
      case ColumnKind::binary: {
        const std::vector<std::string> def{"0", "1"};
        const auto& lv = col.levels.size() == 2 ? col.levels : def;
        out.push_back(raw[j++] > 0.5 ? lv[1] : lv[0]);
        break;
      }
      case ColumnKind::categorical: {
        std::size_t level = 0;
        for (Eigen::Index l = 0; l < col.width(); ++l)
          if (raw[j + l] > 0.5) level = static_cast<std::size_t>(l) + 1;
        out.push_back(col.levels.at(level));
        j += col.width();
        break;
      }
    }
  }
  return out;
}

Eigen::MatrixXd Dataset::design_matrix() const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(patients.size()), P());
  for (std::size_t i = 0; i < patients.size(); ++i)
    X.row(static_cast<Eigen::Index>(i)) = patients[i].x.transpose();
  return X;
}

void Dataset::validate() const {
  if (T < 1 || MP < 0 || MD < 0) throw InputError("invalid dataset dimensions");
  std::set<std::string> ids;
  for (const auto& p : patients) {
    if (!ids.insert(p.id).second) throw InputError("duplicate patient id '" + p.id + "'");
    if (p.x.size() != P())
      throw InputError("patient '" + p.id + "': expected " + std::to_string(P()) +
                       " risk factors");
    if (!p.x.allFinite()) throw InputError("patient '" + p.id + "': non-finite risk factor");
    if (static_cast<int>(p.y.size()) != T)
      throw InputError("patient '" + p.id + "': trajectory length " +
                       std::to_string(p.y.size()) + " != T=" + std::to_string(T));
    for (const auto& o : p.y) {
      if (o.pain && (*o.pain < 0 || *o.pain > MP))
        throw InputError("patient '" + p.id + "': pain value out of range");
      if (o.disability && (*o.disability < 0 || *o.disability > MD))
        throw InputError("patient '" + p.id + "': disability value out of range");
    }
  }
}

// Fills ds.patients[*].y from a long-format trajectory file. With add_unknown,
// ids not in index_of become new patients (in order of first appearance).
static void read_trajectories(const std::filesystem::path& trajectory_path, const DataConfig& config, Dataset& ds,
                              std::unordered_map<std::string, std::size_t>& index_of, bool add_unknown) {
  const auto traj = csv::read(trajectory_path);
  const std::array<std::string, 4> needed{"id", "week", "pain", "disability"};
  std::array<std::size_t, 4> tc{};
  for (std::size_t n = 0; n < needed.size(); ++n) {
    const auto idx = traj.column(needed[n]);
    if (idx < 0)
      throw InputError(trajectory_path.string() + ": missing '" + needed[n] + "' column");
    tc[n] = static_cast<std::size_t>(idx);
  }
  if (traj.header.size() != needed.size()) {
    for (const auto& h : traj.header)
      if (std::find(needed.begin(), needed.end(), h) == needed.end())
        throw InputError(trajectory_path.string() + ": unknown column '" + h + "'");
  }
  std::vector<std::vector<bool>> seen(ds.patients.size(),
                                      std::vector<bool>(static_cast<std::size_t>(ds.T), false));
  for (std::size_t r = 0; r < traj.rows.size(); ++r) {
    const auto& row = traj.rows[r];
    const auto loc = where(trajectory_path, traj.line[r]);
    auto it = index_of.find(row[tc[0]]);
    if (it == index_of.end()) {
      if (!add_unknown) throw InputError(loc + "id '" + row[tc[0]] + "' not in baseline");
      if (row[tc[0]].empty()) throw InputError(loc + "empty id");
      PatientRecord rec;
      rec.id = row[tc[0]];
      rec.y.assign(static_cast<std::size_t>(ds.T), Observation{});
      ds.patients.push_back(std::move(rec));
      seen.emplace_back(static_cast<std::size_t>(ds.T), false);
      it = index_of.emplace(row[tc[0]], ds.patients.size() - 1).first;
    }
    auto week = parse_long(row[tc[1]]);
    if (!week || *week < 1 || *week > ds.T)
      throw InputError(loc + "week '" + row[tc[1]] + "' not in [1, " + std::to_string(ds.T) + "]");
    const auto t = static_cast<std::size_t>(*week - 1);
    if (seen[it->second][t])
      throw InputError(loc + "duplicate (id, week) pair (" + row[tc[0]] + ", " + row[tc[1]] + ")");
    seen[it->second][t] = true;
    auto& obs = ds.patients[it->second].y[t];
    obs.pain = parse_symptom(row[tc[2]], ds.MP, config.missing_marker, "pain", loc);
    obs.disability = parse_symptom(row[tc[3]], ds.MD, config.missing_marker, "disability", loc);
  }

}

Dataset load_dataset(const std::filesystem::path& baseline_path,
                     const std::filesystem::path& trajectory_path,
                     const RiskFactorEncoding& schema, const DataConfig& config) {
  Dataset ds;
  ds.T = config.T;
  ds.MP = config.MP;
  ds.MD = config.MD;
  ds.encoding = schema;
  if (ds.T < 1) throw InputError("T must be positive");

  const auto base = csv::read(baseline_path);
  const auto id_col = base.column("id");
  if (id_col < 0) throw InputError(baseline_path.string() + ": missing 'id' column");
  std::vector<std::ptrdiff_t> col_index;
  for (const auto& c : schema.columns) {
    const auto idx = base.column(c.name);
    if (idx < 0)
      throw InputError(baseline_path.string() + ": schema column '" + c.name + "' not found");
    col_index.push_back(idx);
  }
  for (std::size_t h = 0; h < base.header.size(); ++h) {
    if (static_cast<std::ptrdiff_t>(h) == id_col) continue;
    const auto& name = base.header[h];
    const bool known = std::any_of(schema.columns.begin(), schema.columns.end(),
                                   [&](const ColumnSpec& c) { return c.name == name; });
    if (!known) throw InputError(baseline_path.string() + ": unknown column '" + name + "'");
  }

  std::unordered_map<std::string, std::size_t> index_of;
  std::vector<Eigen::VectorXd> raw_x;
  for (std::size_t r = 0; r < base.rows.size(); ++r) {
    const auto& row = base.rows[r];
    const auto loc = where(baseline_path, base.line[r]);
    const auto& id = row[static_cast<std::size_t>(id_col)];
    if (id.empty()) throw InputError(loc + "empty id");
    if (index_of.contains(id)) throw InputError(loc + "duplicate id '" + id + "'");
    std::vector<std::string> values;
    for (auto idx : col_index) {
      const auto& v = row[static_cast<std::size_t>(idx)];
      if (v.empty() || v == config.missing_marker)
        throw InputError(loc + "missing risk factor '" + base.header[static_cast<std::size_t>(idx)] +
                         "'");
      values.push_back(v);
    }
    try {
      raw_x.push_back(schema.encode_row(values));
    } catch (const InputError& e) {
      throw InputError(loc + e.what());
    }
    index_of.emplace(id, ds.patients.size());
    PatientRecord rec;
    rec.id = id;
    rec.y.assign(static_cast<std::size_t>(ds.T), Observation{});
    ds.patients.push_back(std::move(rec));
  }

  read_trajectories(trajectory_path, config, ds, index_of, false);

  Eigen::VectorXd centering = Eigen::VectorXd::Zero(schema.width());
  if (schema.has_centering()) {
    centering = schema.centering;
  } else if (!raw_x.empty()) {
    for (const auto& x : raw_x) centering += x;
    centering /= static_cast<double>(raw_x.size());
  }
  if (!centering.allFinite()) throw InputError("non-finite centering values");
  ds.encoding.centering = centering;
  for (std::size_t i = 0; i < ds.patients.size(); ++i) ds.patients[i].x = raw_x[i] - centering;
  ds.validate();
  return ds;
}

Dataset load_trajectories(const std::filesystem::path& trajectory_path, const DataConfig& config) {
  Dataset ds;
  ds.T = config.T;
  ds.MP = config.MP;
  ds.MD = config.MD;
  if (ds.T < 1) throw InputError("T must be positive");
  ds.encoding.centering = Eigen::VectorXd(0);
  std::unordered_map<std::string, std::size_t> index_of;
  read_trajectories(trajectory_path, config, ds, index_of, true);
  for (auto& p : ds.patients) p.x = Eigen::VectorXd(0);
  ds.validate();
  return ds;
}

std::pair<std::string, std::string> dataset_csv(const Dataset& ds) {
  std::ostringstream base;
  base << "id";
  for (const auto& c : ds.encoding.columns) base << ',' << csv::quote(c.name);
  base << '\n';
  const Eigen::VectorXd centering =
      ds.encoding.has_centering() ? ds.encoding.centering : Eigen::VectorXd::Zero(ds.P());
  for (const auto& p : ds.patients) {
    base << csv::quote(p.id);
    for (const auto& v : ds.encoding.decode_row(p.x + centering)) base << ',' << csv::quote(v);
    base << '\n';
  }
  std::ostringstream traj;
  traj << "id,week,pain,disability\n";
  for (const auto& p : ds.patients) {
    for (std::size_t t = 0; t < p.y.size(); ++t) {
      const auto& o = p.y[t];
      if (o.fully_missing()) continue;
      traj << csv::quote(p.id) << ',' << (t + 1) << ','
           << (o.pain ? std::to_string(*o.pain) : "NA") << ','
           << (o.disability ? std::to_string(*o.disability) : "NA") << '\n';
    }
  }
  return {base.str(), traj.str()};
}

void write_dataset(const Dataset& ds, const std::filesystem::path& baseline_path,
                   const std::filesystem::path& trajectory_path) {
  const auto [base, traj] = dataset_csv(ds);
  write_file_atomic(baseline_path, base);
  write_file_atomic(trajectory_path, traj);
}

Eigen::VectorXd column_means(const Dataset& ds) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(ds.P());
  if (ds.empty()) return m;
  const Eigen::VectorXd c =
      ds.encoding.has_centering() ? ds.encoding.centering : Eigen::VectorXd::Zero(ds.P());
  for (const auto& p : ds.patients) m += p.x + c;
  return m / static_cast<double>(ds.size());
}

Dataset recenter(Dataset ds, const Eigen::VectorXd& centering) {
  if (centering.size() != ds.P()) throw InputError("centering vector has wrong length");
  const Eigen::VectorXd old =
      ds.encoding.has_centering() ? ds.encoding.centering : Eigen::VectorXd::Zero(ds.P());
  for (auto& p : ds.patients) p.x = p.x + old - centering;
  ds.encoding.centering = centering;
  return ds;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.encoding = ds.encoding;
  out.T = ds.T;
  out.MP = ds.MP;
  out.MD = ds.MD;
  out.patients.reserve(indices.size());
  for (auto i : indices) out.patients.push_back(ds.patients.at(i));
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (ds.empty()) throw InputError("cannot split an empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("split fraction must be in (0, 1)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ds.size())));
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  Dataset train = subset(ds, a);
  Dataset test = subset(ds, b);
  const Eigen::VectorXd centering = column_means(train);
  return {recenter(std::move(train), centering), recenter(std::move(test), centering)};
}

}  // namespace copulahmm
