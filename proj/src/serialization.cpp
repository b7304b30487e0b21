#include "mixhmm/serialization.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace mixhmm {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + ": expected array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw std::invalid_argument(std::string(what) + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

namespace {

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

// Simplex tolerance is 1e-12 at validation; rows within 1e-9 of 1 are
// repaired here instead of rejected.
void renormalize(Vector& p) {
  const double s = p.sum();
  if (s > 0.0 && std::abs(s - 1.0) > kSimplexTol && std::abs(s - 1.0) <= kRenormTol)
    p /= s;
}

void renormalize_rows(Matrix& a) {
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    Vector row = a.row(r).transpose();
    renormalize(row);
    a.row(r) = row.transpose();
  }
}

json effects_to_json(const PersonalEffects& e) {
  return json{{"ids", e.ids},
              {"r_mean", matrix_to_json(e.r_mean)},
              {"r_var", matrix_to_json(e.r_var)},
              {"m_mean", matrix_to_json(e.m_mean)},
              {"m_var", matrix_to_json(e.m_var)}};
}

PersonalEffects effects_from_json(const json& j) {
  PersonalEffects e;
  e.ids = j.at("ids").get<std::vector<std::string>>();
  e.r_mean = matrix_from_json(j.at("r_mean"), "effects.r_mean");
  e.r_var = matrix_from_json(j.at("r_var"), "effects.r_var");
  e.m_mean = matrix_from_json(j.at("m_mean"), "effects.m_mean");
  e.m_var = matrix_from_json(j.at("m_var"), "effects.m_var");
  return e;
}

json spec_to_json(const ModelSpec& s) {
  return json{{"n_components", s.n_components},
              {"states_per_component", s.states_per_component},
              {"obs_dim", s.obs_dim},
              {"use_inputs", s.use_inputs},
              {"personal_state_offset", s.personal_state_offset},
              {"personal_input_effect", s.personal_input_effect},
              {"left_to_right", s.left_to_right},
              {"prior_var_r", s.prior_var_r},
              {"prior_var_m", s.prior_var_m}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.n_components = j.at("n_components").get<int>();
  s.states_per_component = j.at("states_per_component").get<std::vector<int>>();
  s.obs_dim = j.at("obs_dim").get<int>();
  s.use_inputs = j.value("use_inputs", false);
  s.personal_state_offset = j.value("personal_state_offset", false);
  s.personal_input_effect = j.value("personal_input_effect", false);
  s.left_to_right = j.value("left_to_right", false);
  s.prior_var_r = j.value("prior_var_r", 1.0);
  s.prior_var_m = j.value("prior_var_m", 1.0);
  return s;
}

}  // namespace

json dataset_to_json(const SequenceDataset& data) {
  json seqs = json::array();
  for (const auto& s : data.sequences) {
    json obs = json::array();
    for (Eigen::Index t = 0; t < s.length(); ++t) {
      json row = json::array();
      for (Eigen::Index d = 0; d < s.dim(); ++d) {
        if (s.mask(t, d))
          row.push_back(s.observations(t, d));
        else
          row.push_back(nullptr);
      }
      obs.push_back(std::move(row));
    }
    json js{{"id", s.id}, {"observations", std::move(obs)},
            {"inputs", vector_to_json(s.inputs)}};
    if (s.times) js["times"] = vector_to_json(*s.times);
    seqs.push_back(std::move(js));
  }
  return json{{"dim", data.dim}, {"sequences", std::move(seqs)}};
}

SequenceDataset dataset_from_json(const json& j) {
  SequenceDataset data;
  data.dim = j.at("dim").get<Eigen::Index>();
  for (const auto& js : j.at("sequences")) {
    Sequence s;
    s.id = js.at("id").get<std::string>();
    const auto& obs = js.at("observations");
    const auto t = static_cast<Eigen::Index>(obs.size());
    s.observations = Matrix::Zero(t, data.dim);
    s.mask = BoolMatrix::Constant(t, data.dim, false);
    for (Eigen::Index r = 0; r < t; ++r) {
      if (static_cast<Eigen::Index>(obs[r].size()) != data.dim)
        throw std::invalid_argument("sequence " + s.id +
                                    ": observation row width != dim");
      for (Eigen::Index d = 0; d < data.dim; ++d) {
        if (!obs[r][d].is_null()) {
          s.observations(r, d) = obs[r][d].get<double>();
          s.mask(r, d) = true;
        }
      }
    }
    s.inputs = js.contains("inputs") ? vector_from_json(js.at("inputs"))
                                     : Vector::Zero(t);
    if (js.contains("times")) s.times = vector_from_json(js.at("times"));
    data.sequences.push_back(std::move(s));
  }
  return data;
}

json mixture_to_json(const MixtureParameters& params) {
  json comps = json::array();
  for (const auto& c : params.components)
    comps.push_back(json{{"pi", vector_to_json(c.pi)},
                         {"A", matrix_to_json(c.A)},
                         {"mu", matrix_to_json(c.mu)},
                         {"var", matrix_to_json(c.var)},
                         {"v", matrix_to_json(c.v)}});
  return json{{"alpha", vector_to_json(params.alpha)},
              {"components", std::move(comps)}};
}

MixtureParameters mixture_from_json(const json& j) {
  MixtureParameters params;
  params.alpha = vector_from_json(j.at("alpha"));
  renormalize(params.alpha);
  for (const auto& jc : j.at("components")) {
    HMMParameters c;
    c.pi = vector_from_json(jc.at("pi"));
    renormalize(c.pi);
    c.A = matrix_from_json(jc.at("A"), "A");
    renormalize_rows(c.A);
    c.mu = matrix_from_json(jc.at("mu"), "mu");
    c.var = matrix_from_json(jc.at("var"), "var");
    c.v = matrix_from_json(jc.at("v"), "v");
    params.components.push_back(std::move(c));
  }
  return params;
}

json model_to_json(const ModelFile& model) {
  json j = mixture_to_json(model.params);
  json blocks = json::array();
  int start = 0;
  for (int l : model.spec.states_per_component) {
    blocks.push_back(json::array({start, l}));
    start += l;
  }
  j["spec"] = spec_to_json(model.spec);
  j["blocks"] = std::move(blocks);
  if (model.effects) j["effects"] = effects_to_json(*model.effects);
  return j;
}

ModelFile model_from_json(const json& j) {
  ModelFile m;
  m.spec = spec_from_json(j.at("spec"));
  m.params = mixture_from_json(j);
  if (j.contains("effects") && !j.at("effects").is_null())
    m.effects = effects_from_json(j.at("effects"));
  return m;
}

json fit_result_to_json(const FitResult& fit) {
  ModelFile model{fit.spec, fit.params, fit.effects};
  json seqs = json::array();
  for (std::size_t i = 0; i < fit.paths.size(); ++i)
    seqs.push_back(json{{"id", fit.effects.ids.size() == fit.paths.size()
                                   ? fit.effects.ids[i]
                                   : std::to_string(i)},
                        {"label", fit.labels[i]},
                        {"path", fit.paths[i]}});
  return json{{"model", model_to_json(model)},
              {"objective_trace", fit.objective_trace},
              {"loglik", fit.loglik},
              {"map_loglik", fit.map_loglik},
              {"n_iters", fit.n_iters},
              {"converged", fit.converged},
              {"sequences", std::move(seqs)}};
}

FitResult fit_result_from_json(const json& j) {
  FitResult fit;
  ModelFile model = model_from_json(j.at("model"));
  fit.spec = model.spec;
  fit.params = model.params;
  if (model.effects) fit.effects = *model.effects;
  fit.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  fit.loglik = j.at("loglik").get<double>();
  fit.map_loglik = j.at("map_loglik").get<double>();
  fit.n_iters = j.at("n_iters").get<int>();
  fit.converged = j.at("converged").get<bool>();
  for (const auto& js : j.at("sequences")) {
    fit.labels.push_back(js.at("label").get<int>());
    fit.paths.push_back(js.at("path").get<std::vector<int>>());
  }
  return fit;
}

SequenceDataset dataset_from_csv(std::istream& in) {
  struct Entry { Eigen::Index t, d; double value; };
  std::map<std::string, std::vector<Entry>> entries;        // id -> cells
  std::map<std::string, std::map<Eigen::Index, double>> doses;
  std::vector<std::string> order;
  Eigen::Index dim = 0;

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("csv: empty input");
  // Header is required: id,t,feature_index,value,dose.
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, t_s, d_s, v_s, dose_s;
    if (!std::getline(ls, id, ',') || !std::getline(ls, t_s, ',') ||
        !std::getline(ls, d_s, ',') || !std::getline(ls, v_s, ','))
      throw std::invalid_argument("csv line " + std::to_string(lineno) +
                                  ": expected id,t,feature_index,value[,dose]");
    std::getline(ls, dose_s, ',');
    const auto t = static_cast<Eigen::Index>(std::stoll(t_s));
    const auto d = static_cast<Eigen::Index>(std::stoll(d_s));
    if (t < 0 || d < 0)
      throw std::invalid_argument("csv line " + std::to_string(lineno) +
                                  ": negative index");
    if (entries.find(id) == entries.end()) order.push_back(id);
    if (!v_s.empty()) entries[id].push_back({t, d, std::stod(v_s)});
    else entries[id];  // row with empty value still registers the visit
    if (!dose_s.empty()) doses[id][t] = std::stod(dose_s);
    dim = std::max(dim, d + 1);
  }

  SequenceDataset data;
  data.dim = dim;
  for (const auto& id : order) {
    Eigen::Index t_max = -1;
    for (const auto& e : entries[id]) t_max = std::max(t_max, e.t);
    for (const auto& [t, dose] : doses[id]) t_max = std::max(t_max, t);
    Sequence s;
    s.id = id;
    s.observations = Matrix::Zero(t_max + 1, dim);
    s.mask = BoolMatrix::Constant(t_max + 1, dim, false);
    s.inputs = Vector::Zero(t_max + 1);
    for (const auto& e : entries[id]) {
      s.observations(e.t, e.d) = e.value;
      s.mask(e.t, e.d) = true;
    }
    for (const auto& [t, dose] : doses[id]) s.inputs[t] = dose;
    data.sequences.push_back(std::move(s));
  }
  return data;
}

SequenceDataset load_dataset(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    return dataset_from_csv(in);
  }
  return dataset_from_json(load_json(path));
}

void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << j.dump(2) << "\n";
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return json::parse(in);
}

}  // namespace mixhmm
