#include "mmexit/model_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmexit/errors.hpp"

namespace mmexit {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& what) { throw ValidationError("model file: " + what); }

const json& field(const json& obj, const char* key)
{
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(std::string("missing field '") + key + "'");
    return *it;
}

double number(const json& v, const std::string& where)
{
    if (!v.is_number()) schema_error(where + " must be a number");
    return v.get<double>();
}

RealVector vector_of(const json& v, const std::string& where)
{
    if (!v.is_array()) schema_error(where + " must be an array of numbers");
    RealVector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], where);
    return out;
}

RealMatrix matrix_of(const json& v, const std::string& where)
{
    if (!v.is_array() || v.empty() || !v[0].is_array()) schema_error(where + " must be an array of rows");
    const std::size_t rows = v.size(), cols = v[0].size();
    RealMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols) schema_error(where + " rows must have equal length");
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = number(v[i][j], where);
    }
    return out;
}

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!obj.is_object()) schema_error(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!ok.count(it.key())) schema_error("unknown field '" + it.key() + "' in " + where);
    }
}

NegJumpDist dist_of(const json& v, const std::string& where)
{
    only_keys(v, {"exponentials", "atoms"}, where);
    NegJumpDist d;
    if (auto it = v.find("exponentials"); it != v.end()) {
        if (!it->is_array()) schema_error(where + ".exponentials must be an array");
        for (const auto& e : *it) {
            only_keys(e, {"weight", "rate"}, where + ".exponentials[]");
            d.exponentials.push_back({number(field(e, "weight"), where), number(field(e, "rate"), where)});
        }
    }
    if (auto it = v.find("atoms"); it != v.end()) {
        if (!it->is_array()) schema_error(where + ".atoms must be an array");
        for (const auto& a : *it) {
            only_keys(a, {"weight", "location"}, where + ".atoms[]");
            d.atoms.push_back({number(field(a, "weight"), where), number(field(a, "location"), where)});
        }
    }
    return d;
}

std::vector<NegJumpDist> dists_of(const json& v, const std::string& where)
{
    if (!v.is_array()) schema_error(where + " must be an array");
    std::vector<NegJumpDist> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(dist_of(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

void require_length(Eigen::Index n, int m, const char* name)
{
    if (n != m) schema_error(std::string(name) + " must have one entry per state");
}

json to_json(const RealVector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const RealMatrix& a)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const NegJumpDist& d)
{
    json out = json::object();
    json e = json::array(), a = json::array();
    for (const auto& c : d.exponentials) e.push_back({{"weight", c.weight}, {"rate", c.rate}});
    for (const auto& c : d.atoms) a.push_back({{"weight", c.weight}, {"location", c.location}});
    if (!e.empty()) out["exponentials"] = e;
    if (!a.empty()) out["atoms"] = a;
    return out;
}

Scenario parse_model(const json& doc)
{
    only_keys(doc, {"nu", "P", "lambda", "c", "pos_jump_prob", "neg_jump", "trans_jump"}, "model");
    ModelSpec s;
    s.nu = vector_of(field(doc, "nu"), "nu");
    s.m = static_cast<int>(s.nu.size());
    if (s.m < 1) schema_error("nu must not be empty");
    s.P = matrix_of(field(doc, "P"), "P");
    if (s.P.rows() != s.m || s.P.cols() != s.m) schema_error("P must be m x m");
    s.lambda = vector_of(field(doc, "lambda"), "lambda");
    s.c = vector_of(field(doc, "c"), "c");
    s.pos_jump_prob = vector_of(field(doc, "pos_jump_prob"), "pos_jump_prob");
    s.neg_jump = dists_of(field(doc, "neg_jump"), "neg_jump");
    require_length(s.lambda.size(), s.m, "lambda");
    require_length(s.c.size(), s.m, "c");
    require_length(s.pos_jump_prob.size(), s.m, "pos_jump_prob");
    require_length(static_cast<Eigen::Index>(s.neg_jump.size()), s.m, "neg_jump");
    if (auto it = doc.find("trans_jump"); it != doc.end()) {
        if (!it->is_array() || static_cast<int>(it->size()) != s.m) schema_error("trans_jump must be m x m");
        for (int k = 0; k < s.m; ++k) {
            auto row = dists_of((*it)[k], "trans_jump[" + std::to_string(k) + "]");
            require_length(static_cast<Eigen::Index>(row.size()), s.m, "trans_jump rows");
            s.trans_jump.push_back(std::move(row));
        }
    } else {
        s.trans_jump = ModelSpec::zero_transition_jumps(s.P);
    }
    return Scenario{std::move(s), std::nullopt};
}

Scenario parse_risk(const json& doc)
{
    only_keys(doc, {"nu", "P", "c", "lambda1", "lambda2", "claims", "B", "u"}, "risk model");
    RealVector nu = vector_of(field(doc, "nu"), "nu");
    const int m = static_cast<int>(nu.size());
    if (m < 1) schema_error("nu must not be empty");
    RealMatrix P = matrix_of(field(doc, "P"), "P");
    if (P.rows() != m || P.cols() != m) schema_error("P must be m x m");
    RealVector c = vector_of(field(doc, "c"), "c");
    RealVector l1 = vector_of(field(doc, "lambda1"), "lambda1");
    RealVector l2 = vector_of(field(doc, "lambda2"), "lambda2");
    auto claims = dists_of(field(doc, "claims"), "claims");
    require_length(c.size(), m, "c");
    require_length(l1.size(), m, "lambda1");
    require_length(l2.size(), m, "lambda2");
    require_length(static_cast<Eigen::Index>(claims.size()), m, "claims");
    double B = number(field(doc, "B"), "B");
    double u = number(field(doc, "u"), "u");
    RiskModelSpec rs = make_risk_model(nu, P, c, l1, l2, std::move(claims), B, u);
    ModelSpec base = rs.base;
    return Scenario{std::move(base), std::move(rs)};
}

} // namespace

Scenario parse_scenario(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        schema_error(std::string("not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) schema_error("top level must be an object");
    return doc.contains("lambda1") ? parse_risk(doc) : parse_model(doc);
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot read model file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string to_json_text(const ModelSpec& spec)
{
    json doc;
    doc["nu"] = to_json(spec.nu);
    doc["P"] = to_json(spec.P);
    doc["lambda"] = to_json(spec.lambda);
    doc["c"] = to_json(spec.c);
    doc["pos_jump_prob"] = to_json(spec.pos_jump_prob);
    doc["neg_jump"] = json::array();
    for (const auto& d : spec.neg_jump) doc["neg_jump"].push_back(to_json(d));
    doc["trans_jump"] = json::array();
    for (const auto& row : spec.trans_jump) {
        json r = json::array();
        for (const auto& d : row) r.push_back(to_json(d));
        doc["trans_jump"].push_back(r);
    }
    return doc.dump(2);
}

std::string to_json_text(const RiskModelSpec& rs)
{
    json doc;
    doc["nu"] = to_json(rs.base.nu);
    doc["P"] = to_json(rs.base.P);
    doc["c"] = to_json(rs.base.c);
    doc["lambda1"] = to_json(rs.lambda1);
    doc["lambda2"] = to_json(rs.lambda2);
    doc["claims"] = json::array();
    for (const auto& d : rs.claims) doc["claims"].push_back(to_json(d));
    doc["B"] = rs.B;
    doc["u"] = rs.u;
    return doc.dump(2);
}

} // namespace mmexit
