// Copyright 2026 The nlvn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Scenario files (TOML, schema_version = 1) in; reports out.
//
//   schema_version = 1
//   experiment = "pure_state_condition"
//   dim = 2                      # or dims = [2, 2]
//   hamiltonian = "sigma_z"      # or hamiltonians = ["1.0*Z", {entries = [...]}, {random = true}]
//   q = 1.0
//
//   [integrator]
//   scheme = "unitary_rk4"       # unitary_midpoint | unitary_rk4 | rk4_direct
//   dt = 1e-3
//   t_final = 10.0
//   sample_every = 10
//
// plus one table named after the experiment holding its own inputs. See
// README.md for the full schema.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "nlvn/dynamics.hpp"
#include "nlvn/experiments.hpp"
#include "nlvn/matrix_core.hpp"
#include "nlvn/quantum_states.hpp"

namespace nlvn {

inline constexpr std::int64_t kSchemaVersion = 1;

enum class ExperimentId { pure_state_condition, mixture_defect, no_signaling, linearity_criterion, decomposition_divergence };

inline constexpr ExperimentId kAllExperiments[] = {ExperimentId::pure_state_condition, ExperimentId::mixture_defect,
                                                   ExperimentId::no_signaling, ExperimentId::linearity_criterion,
                                                   ExperimentId::decomposition_divergence};

inline std::string_view to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::pure_state_condition:
            return "pure_state_condition";
        case ExperimentId::mixture_defect:
            return "mixture_defect";
        case ExperimentId::no_signaling:
            return "no_signaling";
        case ExperimentId::linearity_criterion:
            return "linearity_criterion";
        case ExperimentId::decomposition_divergence:
            return "decomposition_divergence";
    }
    return "unknown";
}

inline std::string_view describe(ExperimentId id) {
    switch (id) {
        case ExperimentId::pure_state_condition:
            return "random pure states: nonlinear vs linear trajectories must coincide (pass/fail)";
        case ExperimentId::mixture_defect:
            return "mixed state evolved whole vs member-wise and re-mixed (informative)";
        case ExperimentId::no_signaling:
            return "extensions sharing a reduced state must give identical local evolutions (pass/fail)";
        case ExperimentId::linearity_criterion:
            return "partially entangled pure state: composite nonlinear vs linear evolution (informative)";
        case ExperimentId::decomposition_divergence:
            return "two decompositions of one density matrix evolved member-wise (informative)";
    }
    return "";
}

inline std::optional<ExperimentId> parse_experiment(std::string_view name) {
    for (ExperimentId id : kAllExperiments) {
        if (to_string(id) == name) {
            return id;
        }
    }
    return std::nullopt;
}

//------------------------------------------------------------------------------
// Scenario model
//------------------------------------------------------------------------------

/// Hamiltonian of one subsystem: a real-weighted Pauli sum ("1.0*ZI + 0.5*IX",
/// "sigma_z", "zero"), explicit row-major entries, or a seeded GUE sample.
struct OperatorSpec {
    enum class Kind { pauli, entries, random };
    Kind kind = Kind::pauli;
    std::string expression;
    std::vector<Complex> entries;

    bool operator==(const OperatorSpec &) const = default;
};

/// A state reference: named_state, explicit amplitudes (normalized on load),
/// explicit density-matrix entries, or a tensor product of other references.
struct StateSpec {
    enum class Kind { named, amplitudes, entries, product };
    Kind kind = Kind::named;
    std::string name;
    std::vector<double> params;
    std::vector<Complex> values;
    std::vector<StateSpec> factors;

    bool operator==(const StateSpec &) const = default;
};

struct MemberSpec {
    double weight = 0.0;
    StateSpec state;

    bool operator==(const MemberSpec &) const = default;
};

/// "eigen", {random = N} members, or an explicit member list.
struct DecompositionSpec {
    enum class Kind { eigen, random, members };
    Kind kind = Kind::eigen;
    std::size_t random_members = 0;
    std::vector<MemberSpec> members;

    bool operator==(const DecompositionSpec &) const = default;
};

struct Scenario {
    std::int64_t schema_version = kSchemaVersion;
    ExperimentId experiment = ExperimentId::pure_state_condition;
    std::string name;
    std::uint64_t seed = 0;
    double q = 1.0;
    double hbar = 1.0;
    GeneratorKind generator = GeneratorKind::nonlinear;
    std::vector<std::size_t> dims;
    std::vector<OperatorSpec> hamiltonians;
    IntegratorConfig integrator;
    std::string output;
    std::optional<Verdict> expected_verdict;

    // pure_state_condition
    std::size_t trials = 100;
    std::optional<StateSpec> inject_state;
    // mixture_defect
    std::vector<MemberSpec> members;
    // no_signaling
    std::vector<StateSpec> extensions;
    std::size_t random_pairs = 0;
    // linearity_criterion
    double schmidt_weight = 0.5;
    // decomposition_divergence
    std::optional<StateSpec> state;
    DecompositionSpec first;
    DecompositionSpec second;

    bool operator==(const Scenario &) const = default;
};

//------------------------------------------------------------------------------
// Errors
//------------------------------------------------------------------------------

enum class ScenarioErrorCode { syntax, unknown_experiment, missing_field, unknown_field, type_mismatch, invalid_value };

inline std::string_view to_string(ScenarioErrorCode code) {
    switch (code) {
        case ScenarioErrorCode::syntax:
            return "syntax";
        case ScenarioErrorCode::unknown_experiment:
            return "unknown_experiment";
        case ScenarioErrorCode::missing_field:
            return "missing_field";
        case ScenarioErrorCode::unknown_field:
            return "unknown_field";
        case ScenarioErrorCode::type_mismatch:
            return "type_mismatch";
        case ScenarioErrorCode::invalid_value:
            return "invalid_value";
    }
    return "unknown";
}

/// Parse or validation failure: `code` is machine-readable, `field` is the
/// dotted path of the offending key, `constraint` what it violated.
class ScenarioError : public std::runtime_error {
   public:
    ScenarioError(ScenarioErrorCode code, std::string field, std::string constraint)
        : std::runtime_error("error[" + std::string(to_string(code)) + "] " + (field.empty() ? "<document>" : field) +
                             ": " + constraint),
          code_(code),
          field_(std::move(field)),
          constraint_(std::move(constraint)) {
    }

    ScenarioErrorCode code() const noexcept {
        return code_;
    }
    const std::string &field() const noexcept {
        return field_;
    }
    const std::string &constraint() const noexcept {
        return constraint_;
    }

   private:
    ScenarioErrorCode code_;
    std::string field_;
    std::string constraint_;
};

/// An experiment failed while running; carries the scenario name.
class ScenarioRunError : public std::runtime_error {
   public:
    ScenarioRunError(const std::string &scenario, const std::string &what)
        : std::runtime_error("scenario '" + scenario + "': " + what), scenario_(scenario) {
    }
    const std::string &scenario() const noexcept {
        return scenario_;
    }

   private:
    std::string scenario_;
};

//------------------------------------------------------------------------------
// Operator and state resolution
//------------------------------------------------------------------------------

namespace scenario_detail {

[[noreturn]] inline void fail(ScenarioErrorCode code, const std::string &field, const std::string &constraint) {
    throw ScenarioError(code, field, constraint);
}

inline ComplexMatrix pauli_matrix(char c) {
    ComplexMatrix m(2, 2);
    switch (c) {
        case 'I':
            m << 1, 0, 0, 1;
            break;
        case 'X':
            m << 0, 1, 1, 0;
            break;
        case 'Y':
            m << 0, Complex(0, -1), Complex(0, 1), 0;
            break;
        case 'Z':
            m << 1, 0, 0, -1;
            break;
        default:
            throw std::invalid_argument(std::string("unknown Pauli letter '") + c + "'");
    }
    return m;
}

inline std::string pauli_alias(std::string_view label) {
    if (label == "sigma_x") return "X";
    if (label == "sigma_y") return "Y";
    if (label == "sigma_z") return "Z";
    if (label == "identity") return "I";
    return std::string(label);
}

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

}  // namespace scenario_detail

/// Evaluates a real-weighted sum of Pauli strings on `dim` = 2^n.
inline ComplexMatrix parse_pauli_sum(std::string_view text, std::size_t dim) {
    using scenario_detail::is_space;
    std::string s;
    for (char c : text) {
        if (!is_space(c)) {
            s.push_back(c);
        }
    }
    const auto d = static_cast<Eigen::Index>(dim);
    ComplexMatrix total = ComplexMatrix::Zero(d, d);
    if (s == "zero" || s == "0") {
        return total;
    }
    if (s.empty()) {
        throw std::invalid_argument("empty operator expression");
    }
    std::size_t pos = 0;
    bool first = true;
    while (pos < s.size()) {
        double sign = 1.0;
        if (s[pos] == '+' || s[pos] == '-') {
            sign = s[pos] == '-' ? -1.0 : 1.0;
            ++pos;
        } else if (!first) {
            throw std::invalid_argument("expected '+' or '-' at position " + std::to_string(pos));
        }
        first = false;
        double coefficient = 1.0;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), coefficient);
        if (ec == std::errc()) {
            pos = static_cast<std::size_t>(ptr - s.data());
            if (pos >= s.size() || s[pos] != '*') {
                throw std::invalid_argument("expected '*' after coefficient");
            }
            ++pos;
        }
        std::size_t start = pos;
        while (pos < s.size() && (std::isalpha(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) {
            ++pos;
        }
        if (start == pos) {
            throw std::invalid_argument("expected a Pauli string at position " + std::to_string(start));
        }
        std::string label = scenario_detail::pauli_alias(std::string_view(s).substr(start, pos - start));
        std::size_t label_dim = std::size_t{1} << label.size();
        if (label.size() > 16 || label_dim != dim) {
            throw std::invalid_argument("Pauli string '" + label + "' acts on dim " +
                                        (label.size() > 16 ? std::string("> 65536") : std::to_string(label_dim)) +
                                        ", subsystem has dim " + std::to_string(dim));
        }
        ComplexMatrix term = scenario_detail::pauli_matrix(label[0]);
        for (std::size_t k = 1; k < label.size(); ++k) {
            term = tensor_product(term, scenario_detail::pauli_matrix(label[k]));
        }
        total += sign * coefficient * term;
    }
    return total;
}

namespace scenario_detail {

inline ComplexMatrix square_from_entries(const std::vector<Complex> &entries, const std::string &field) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(entries.size()))));
    if (n == 0 || static_cast<std::size_t>(n * n) != entries.size()) {
        fail(ScenarioErrorCode::invalid_value, field, "entries must hold dim*dim values in row-major order");
    }
    ComplexMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = entries[static_cast<std::size_t>(i * n + j)];
        }
    }
    return m;
}

}  // namespace scenario_detail

/// Builds the Hamiltonian of subsystem `index`; random operators draw from
/// derive_seed(seed, 1'000'000 + index).
inline ComplexMatrix resolve_operator(const OperatorSpec &spec, std::size_t dim, std::uint64_t seed, std::size_t index,
                                      const std::string &field) {
    using scenario_detail::fail;
    ComplexMatrix h;
    switch (spec.kind) {
        case OperatorSpec::Kind::pauli:
            try {
                h = parse_pauli_sum(spec.expression, dim);
            } catch (const std::invalid_argument &e) {
                fail(ScenarioErrorCode::invalid_value, field, e.what());
            }
            break;
        case OperatorSpec::Kind::entries:
            h = scenario_detail::square_from_entries(spec.entries, field);
            if (nlvn::dim(h) != dim) {
                fail(ScenarioErrorCode::invalid_value, field,
                     "operator dim " + std::to_string(nlvn::dim(h)) + " does not match subsystem dim " +
                         std::to_string(dim));
            }
            break;
        case OperatorSpec::Kind::random: {
            Rng rng(derive_seed(seed, 1'000'000 + index));
            h = random_hermitian(dim, rng);
            break;
        }
    }
    if (!h.allFinite() || hermiticity_defect(h) > kHermitianTolerance) {
        fail(ScenarioErrorCode::invalid_value, field, "operator must be Hermitian");
    }
    return h;
}

inline DensityMatrix resolve_state(const StateSpec &spec, const std::string &field) {
    using scenario_detail::fail;
    try {
        switch (spec.kind) {
            case StateSpec::Kind::named: {
                DensityMatrix rho = as_density(named_state(spec.name, spec.params));
                std::vector<std::size_t> structure = named_state_structure(spec.name);
                return structure.empty() ? rho : rho.with_structure(structure);
            }
            case StateSpec::Kind::amplitudes: {
                ComplexVector v(static_cast<Eigen::Index>(spec.values.size()));
                for (std::size_t i = 0; i < spec.values.size(); ++i) {
                    v(static_cast<Eigen::Index>(i)) = spec.values[i];
                }
                return density_from_pure(StateVector::normalized(v));
            }
            case StateSpec::Kind::entries:
                return DensityMatrix(scenario_detail::square_from_entries(spec.values, field));
            case StateSpec::Kind::product: {
                if (spec.factors.size() < 2) {
                    fail(ScenarioErrorCode::invalid_value, field, "product needs at least two factors");
                }
                DensityMatrix out = resolve_state(spec.factors[0], field + ".product[0]");
                for (std::size_t i = 1; i < spec.factors.size(); ++i) {
                    out = product_state(out, resolve_state(spec.factors[i], field + ".product[" + std::to_string(i) + "]"));
                }
                return out;
            }
        }
    } catch (const ScenarioError &) {
        throw;
    } catch (const std::exception &e) {
        fail(ScenarioErrorCode::invalid_value, field, e.what());
    }
    fail(ScenarioErrorCode::invalid_value, field, "unknown state kind");
}

inline StateVector resolve_pure(const StateSpec &spec, const std::string &field) {
    using scenario_detail::fail;
    try {
        if (spec.kind == StateSpec::Kind::amplitudes) {
            ComplexVector v(static_cast<Eigen::Index>(spec.values.size()));
            for (std::size_t i = 0; i < spec.values.size(); ++i) {
                v(static_cast<Eigen::Index>(i)) = spec.values[i];
            }
            return StateVector::normalized(v);
        }
        if (spec.kind == StateSpec::Kind::named) {
            NamedState s = named_state(spec.name, spec.params);
            if (const auto *psi = std::get_if<StateVector>(&s)) {
                return *psi;
            }
        }
    } catch (const std::exception &e) {
        fail(ScenarioErrorCode::invalid_value, field, e.what());
    }
    fail(ScenarioErrorCode::invalid_value, field, "mixture members must be pure states (named pure state or amplitudes)");
}

inline EnsembleMixture resolve_members(const std::vector<MemberSpec> &members, const std::string &field) {
    std::vector<MixtureMember> out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        out.push_back({members[i].weight, resolve_pure(members[i].state, field + "[" + std::to_string(i) + "]")});
    }
    try {
        return EnsembleMixture(std::move(out));
    } catch (const std::exception &e) {
        scenario_detail::fail(ScenarioErrorCode::invalid_value, field, e.what());
    }
}

//------------------------------------------------------------------------------
// Parsing
//------------------------------------------------------------------------------

namespace scenario_detail {

inline std::string join(const std::string &prefix, std::string_view key) {
    return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

inline std::string index(const std::string &prefix, std::size_t i) {
    return prefix + "[" + std::to_string(i) + "]";
}

inline void check_keys(const toml::table &t, std::initializer_list<std::string_view> allowed, const std::string &prefix) {
    for (const auto &[key, node] : t) {
        bool known = false;
        for (auto a : allowed) {
            known = known || key.str() == a;
        }
        if (!known) {
            fail(ScenarioErrorCode::unknown_field, join(prefix, key.str()), "unknown key");
        }
    }
}

inline double read_real(const toml::node &n, const std::string &field) {
    if (auto v = n.as_floating_point()) {
        return v->get();
    }
    if (auto v = n.as_integer()) {
        return static_cast<double>(v->get());
    }
    fail(ScenarioErrorCode::type_mismatch, field, "must be a number");
}

inline std::int64_t read_int(const toml::node &n, const std::string &field) {
    if (auto v = n.as_integer()) {
        return v->get();
    }
    fail(ScenarioErrorCode::type_mismatch, field, "must be an integer");
}

inline std::size_t read_count(const toml::node &n, const std::string &field, std::int64_t minimum) {
    std::int64_t v = read_int(n, field);
    if (v < minimum) {
        fail(ScenarioErrorCode::invalid_value, field, "must be >= " + std::to_string(minimum));
    }
    return static_cast<std::size_t>(v);
}

inline std::string read_string(const toml::node &n, const std::string &field) {
    if (auto v = n.as_string()) {
        return v->get();
    }
    fail(ScenarioErrorCode::type_mismatch, field, "must be a string");
}

inline bool read_bool(const toml::node &n, const std::string &field) {
    if (auto v = n.as_boolean()) {
        return v->get();
    }
    fail(ScenarioErrorCode::type_mismatch, field, "must be a boolean");
}

inline const toml::array &read_array(const toml::node &n, const std::string &field) {
    if (auto v = n.as_array()) {
        return *v;
    }
    fail(ScenarioErrorCode::type_mismatch, field, "must be an array");
}

inline const toml::table &read_table(const toml::node &n, const std::string &field) {
    if (auto v = n.as_table()) {
        return *v;
    }
    fail(ScenarioErrorCode::type_mismatch, field, "must be a table");
}

inline double positive(double v, const std::string &field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        fail(ScenarioErrorCode::invalid_value, field, "must be > 0");
    }
    return v;
}

/// Numbers or [re, im] pairs.
inline std::vector<Complex> read_complex_list(const toml::node &n, const std::string &field) {
    std::vector<Complex> out;
    const toml::array &arr = read_array(n, field);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const toml::node &e = *arr.get(i);
        if (const auto *pair = e.as_array()) {
            if (pair->size() != 2) {
                fail(ScenarioErrorCode::invalid_value, index(field, i), "complex entries are [re, im] pairs");
            }
            out.emplace_back(read_real(*pair->get(0), index(field, i) + "[0]"),
                             read_real(*pair->get(1), index(field, i) + "[1]"));
        } else {
            out.emplace_back(read_real(e, index(field, i)), 0.0);
        }
    }
    return out;
}

inline std::vector<double> read_real_list(const toml::node &n, const std::string &field) {
    std::vector<double> out;
    const toml::array &arr = read_array(n, field);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(read_real(*arr.get(i), index(field, i)));
    }
    return out;
}

inline StateSpec read_state_fields(const toml::table &t, const std::string &field,
                                   std::initializer_list<std::string_view> extra_keys = {}) {
    std::vector<std::string_view> allowed{"name", "params", "amplitudes", "entries", "product"};
    allowed.insert(allowed.end(), extra_keys.begin(), extra_keys.end());
    for (const auto &[key, node] : t) {
        if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
            fail(ScenarioErrorCode::unknown_field, join(field, key.str()), "unknown key");
        }
    }
    const int forms = (t.contains("name") ? 1 : 0) + (t.contains("amplitudes") ? 1 : 0) + (t.contains("entries") ? 1 : 0) +
                      (t.contains("product") ? 1 : 0);
    if (forms != 1) {
        fail(ScenarioErrorCode::invalid_value, field, "state needs exactly one of name, amplitudes, entries, product");
    }
    StateSpec s;
    if (const auto *n = t.get("name")) {
        s.kind = StateSpec::Kind::named;
        s.name = read_string(*n, join(field, "name"));
        if (const auto *p = t.get("params")) {
            s.params = read_real_list(*p, join(field, "params"));
        }
    } else if (t.contains("params")) {
        fail(ScenarioErrorCode::invalid_value, join(field, "params"), "params only apply to named states");
    } else if (const auto *a = t.get("amplitudes")) {
        s.kind = StateSpec::Kind::amplitudes;
        s.values = read_complex_list(*a, join(field, "amplitudes"));
    } else if (const auto *e = t.get("entries")) {
        s.kind = StateSpec::Kind::entries;
        s.values = read_complex_list(*e, join(field, "entries"));
    } else {
        s.kind = StateSpec::Kind::product;
        const toml::array &arr = read_array(*t.get("product"), join(field, "product"));
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string f = index(join(field, "product"), i);
            s.factors.push_back(read_state_fields(read_table(*arr.get(i), f), f));
        }
    }
    return s;
}

inline StateSpec read_state(const toml::node &n, const std::string &field) {
    return read_state_fields(read_table(n, field), field);
}

inline std::vector<MemberSpec> read_members(const toml::node &n, const std::string &field) {
    std::vector<MemberSpec> out;
    const toml::array &arr = read_array(n, field);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        std::string f = index(field, i);
        const toml::table &t = read_table(*arr.get(i), f);
        const auto *w = t.get("weight");
        if (!w) {
            fail(ScenarioErrorCode::missing_field, join(f, "weight"), "member weight is required");
        }
        MemberSpec m;
        m.weight = read_real(*w, join(f, "weight"));
        m.state = read_state_fields(t, f, {"weight"});
        out.push_back(std::move(m));
    }
    if (out.empty()) {
        fail(ScenarioErrorCode::invalid_value, field, "needs at least one member");
    }
    return out;
}

inline DecompositionSpec read_decomposition(const toml::node &n, const std::string &field) {
    DecompositionSpec d;
    if (const auto *s = n.as_string()) {
        if (s->get() != "eigen") {
            fail(ScenarioErrorCode::invalid_value, field, "string form must be \"eigen\"");
        }
        d.kind = DecompositionSpec::Kind::eigen;
        return d;
    }
    if (const auto *t = n.as_table()) {
        check_keys(*t, {"random"}, field);
        const auto *r = t->get("random");
        if (!r) {
            fail(ScenarioErrorCode::missing_field, join(field, "random"), "table form is {random = <members>}");
        }
        d.kind = DecompositionSpec::Kind::random;
        d.random_members = read_count(*r, join(field, "random"), 1);
        return d;
    }
    d.kind = DecompositionSpec::Kind::members;
    d.members = read_members(n, field);
    return d;
}

inline OperatorSpec read_operator(const toml::node &n, const std::string &field) {
    OperatorSpec op;
    if (const auto *s = n.as_string()) {
        op.kind = OperatorSpec::Kind::pauli;
        op.expression = s->get();
        return op;
    }
    const toml::table &t = read_table(n, field);
    check_keys(t, {"entries", "random"}, field);
    if (t.contains("entries") == t.contains("random")) {
        fail(ScenarioErrorCode::invalid_value, field, "operator table needs exactly one of entries, random");
    }
    if (const auto *e = t.get("entries")) {
        op.kind = OperatorSpec::Kind::entries;
        op.entries = read_complex_list(*e, join(field, "entries"));
    } else {
        if (!read_bool(*t.get("random"), join(field, "random"))) {
            fail(ScenarioErrorCode::invalid_value, join(field, "random"), "must be true when present");
        }
        op.kind = OperatorSpec::Kind::random;
    }
    return op;
}

}  // namespace scenario_detail

/// Resolves every reference in the scenario, throwing ScenarioError on the
/// first violated constraint.
inline void validate_scenario(const Scenario &s) {
    using scenario_detail::fail;
    const std::size_t parts = s.dims.size();
    for (std::size_t k = 0; k < parts; ++k) {
        resolve_operator(s.hamiltonians[k], s.dims[k], s.seed, k, "hamiltonians[" + std::to_string(k) + "]");
    }
    switch (s.experiment) {
        case ExperimentId::pure_state_condition:
            if (parts != 1) {
                fail(ScenarioErrorCode::invalid_value, "dims", "pure_state_condition needs a single subsystem");
            }
            if (s.generator != GeneratorKind::nonlinear) {
                fail(ScenarioErrorCode::invalid_value, "generator", "pure_state_condition compares nonlinear to linear; must be \"nonlinear\"");
            }
            if (s.inject_state) {
                if (resolve_state(*s.inject_state, "pure_state_condition.inject_state").dim() != s.dims[0]) {
                    fail(ScenarioErrorCode::invalid_value, "pure_state_condition.inject_state", "dim does not match dims");
                }
            }
            break;
        case ExperimentId::mixture_defect:
            if (parts != 1) {
                fail(ScenarioErrorCode::invalid_value, "dims", "mixture_defect needs a single subsystem");
            }
            if (resolve_members(s.members, "mixture_defect.members").dim() != s.dims[0]) {
                fail(ScenarioErrorCode::invalid_value, "mixture_defect.members", "member dim does not match dims");
            }
            break;
        case ExperimentId::no_signaling: {
            if (parts < 2) {
                fail(ScenarioErrorCode::invalid_value, "dims", "no_signaling needs at least two subsystems");
            }
            if (s.extensions.empty() && s.random_pairs == 0) {
                fail(ScenarioErrorCode::missing_field, "no_signaling.extensions",
                     "give extensions, random_pairs, or both");
            }
            if (s.random_pairs > 0 && (parts != 2 || s.dims[1] < s.dims[0])) {
                fail(ScenarioErrorCode::invalid_value, "no_signaling.random_pairs",
                     "random pairs need two subsystems with dims[1] >= dims[0]");
            }
            const std::size_t total = product_of(s.dims);
            std::optional<ComplexMatrix> marginal;
            for (std::size_t i = 0; i < s.extensions.size(); ++i) {
                std::string f = "no_signaling.extensions[" + std::to_string(i) + "]";
                DensityMatrix rho = resolve_state(s.extensions[i], f);
                if (rho.dim() != total || (rho.has_structure() && rho.structure() != s.dims)) {
                    fail(ScenarioErrorCode::invalid_value, f, "does not match dims");
                }
                ComplexMatrix m = partial_trace(rho.matrix(), s.dims, 0);
                if (marginal && (m - *marginal).cwiseAbs().maxCoeff() > kMarginalTolerance) {
                    fail(ScenarioErrorCode::invalid_value, f, "reduced state of subsystem 0 differs from extensions[0]");
                }
                marginal = m;
            }
            break;
        }
        case ExperimentId::linearity_criterion:
            if (s.dims != std::vector<std::size_t>{2, 2}) {
                fail(ScenarioErrorCode::invalid_value, "dims", "linearity_criterion needs dims = [2, 2]");
            }
            if (s.generator != GeneratorKind::nonlinear) {
                fail(ScenarioErrorCode::invalid_value, "generator", "linearity_criterion compares nonlinear to linear; must be \"nonlinear\"");
            }
            if (!(s.schmidt_weight >= 0.0 && s.schmidt_weight <= 1.0)) {
                fail(ScenarioErrorCode::invalid_value, "linearity_criterion.schmidt_weight", "must lie in [0, 1]");
            }
            break;
        case ExperimentId::decomposition_divergence: {
            if (parts != 1) {
                fail(ScenarioErrorCode::invalid_value, "dims", "decomposition_divergence needs a single subsystem");
            }
            if (!s.state && s.first.kind != DecompositionSpec::Kind::members) {
                fail(ScenarioErrorCode::missing_field, "decomposition_divergence.state",
                     "required unless `first` is an explicit member list");
            }
            DensityMatrix rho = s.state ? resolve_state(*s.state, "decomposition_divergence.state")
                                        : density_from_mixture(resolve_members(s.first.members, "decomposition_divergence.first"));
            if (rho.dim() != s.dims[0]) {
                fail(ScenarioErrorCode::invalid_value, "decomposition_divergence.state", "dim does not match dims");
            }
            for (const auto &[d, f] : {std::pair{&s.first, "decomposition_divergence.first"},
                                       std::pair{&s.second, "decomposition_divergence.second"}}) {
                if (d->kind == DecompositionSpec::Kind::members) {
                    EnsembleMixture mix = resolve_members(d->members, f);
                    if (mix.dim() != rho.dim() ||
                        (density_from_mixture(mix).matrix() - rho.matrix()).cwiseAbs().maxCoeff() > kMarginalTolerance) {
                        fail(ScenarioErrorCode::invalid_value, f, "does not reproduce the density matrix");
                    }
                }
            }
            break;
        }
    }
}

/// Parses and fully validates a scenario document.
inline Scenario parse_scenario(std::string_view text) {
    using namespace scenario_detail;
    toml::table doc;
    try {
        doc = toml::parse(text);
    } catch (const toml::parse_error &e) {
        std::ostringstream where;
        where << "line " << e.source().begin.line << ", column " << e.source().begin.column;
        fail(ScenarioErrorCode::syntax, where.str(), std::string(e.description()));
    }

    Scenario s;
    const auto *version = doc.get("schema_version");
    if (!version) {
        fail(ScenarioErrorCode::missing_field, "schema_version", "required (schema_version = 1)");
    }
    s.schema_version = read_int(*version, "schema_version");
    if (s.schema_version != kSchemaVersion) {
        fail(ScenarioErrorCode::invalid_value, "schema_version", "unsupported version, expected 1");
    }
    const auto *experiment = doc.get("experiment");
    if (!experiment) {
        fail(ScenarioErrorCode::missing_field, "experiment", "required");
    }
    std::string experiment_name = read_string(*experiment, "experiment");
    auto id = parse_experiment(experiment_name);
    if (!id) {
        fail(ScenarioErrorCode::unknown_experiment, "experiment", "unknown experiment '" + experiment_name + "'");
    }
    s.experiment = *id;

    check_keys(doc,
               {"schema_version", "experiment", "name", "seed", "q", "hbar", "generator", "dim", "dims", "hamiltonian",
                "hamiltonians", "integrator", "output", "expected_verdict", to_string(s.experiment)},
               "");

    s.name = doc.contains("name") ? read_string(*doc.get("name"), "name") : std::string(to_string(s.experiment));
    if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos) {
        fail(ScenarioErrorCode::invalid_value, "name", "must be non-empty and contain no path separators");
    }
    if (const auto *n = doc.get("seed")) {
        std::int64_t seed = read_int(*n, "seed");
        if (seed < 0) {
            fail(ScenarioErrorCode::invalid_value, "seed", "must be >= 0");
        }
        s.seed = static_cast<std::uint64_t>(seed);
    }
    if (const auto *n = doc.get("q")) {
        s.q = positive(read_real(*n, "q"), "q");
    }
    if (const auto *n = doc.get("hbar")) {
        s.hbar = positive(read_real(*n, "hbar"), "hbar");
    }
    if (const auto *n = doc.get("generator")) {
        std::string g = read_string(*n, "generator");
        if (g != "linear" && g != "nonlinear") {
            fail(ScenarioErrorCode::invalid_value, "generator", "must be \"linear\" or \"nonlinear\"");
        }
        s.generator = g == "linear" ? GeneratorKind::linear : GeneratorKind::nonlinear;
    }

    if (doc.contains("dim") == doc.contains("dims")) {
        fail(ScenarioErrorCode::missing_field, "dims", "give exactly one of dim, dims");
    }
    if (const auto *n = doc.get("dim")) {
        s.dims = {read_count(*n, "dim", 1)};
    } else {
        const toml::array &arr = read_array(*doc.get("dims"), "dims");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            s.dims.push_back(read_count(*arr.get(i), index("dims", i), 1));
        }
        if (s.dims.empty()) {
            fail(ScenarioErrorCode::invalid_value, "dims", "must list at least one subsystem");
        }
    }
    if (product_of(s.dims) > 64) {
        fail(ScenarioErrorCode::invalid_value, "dims", "total dimension must be <= 64");
    }

    if (doc.contains("hamiltonian") == doc.contains("hamiltonians")) {
        fail(ScenarioErrorCode::missing_field, "hamiltonians", "give exactly one of hamiltonian, hamiltonians");
    }
    if (const auto *n = doc.get("hamiltonian")) {
        if (s.dims.size() != 1) {
            fail(ScenarioErrorCode::invalid_value, "hamiltonian", "single-operator form needs one subsystem; use hamiltonians");
        }
        s.hamiltonians.push_back(read_operator(*n, "hamiltonian"));
    } else {
        const toml::array &arr = read_array(*doc.get("hamiltonians"), "hamiltonians");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            s.hamiltonians.push_back(read_operator(*arr.get(i), index("hamiltonians", i)));
        }
        if (s.hamiltonians.size() != s.dims.size()) {
            fail(ScenarioErrorCode::invalid_value, "hamiltonians", "needs one operator per subsystem in dims");
        }
    }

    if (const auto *n = doc.get("integrator")) {
        const toml::table &t = read_table(*n, "integrator");
        check_keys(t, {"scheme", "dt", "t_final", "sample_every"}, "integrator");
        if (const auto *v = t.get("scheme")) {
            std::string name = read_string(*v, "integrator.scheme");
            auto scheme = parse_scheme(name);
            if (!scheme) {
                fail(ScenarioErrorCode::invalid_value, "integrator.scheme",
                     "must be one of unitary_midpoint, unitary_rk4, rk4_direct");
            }
            s.integrator.scheme = *scheme;
        }
        if (const auto *v = t.get("dt")) {
            s.integrator.dt = positive(read_real(*v, "integrator.dt"), "integrator.dt");
        }
        if (const auto *v = t.get("t_final")) {
            s.integrator.t_final = positive(read_real(*v, "integrator.t_final"), "integrator.t_final");
        }
        if (const auto *v = t.get("sample_every")) {
            s.integrator.sample_every = read_count(*v, "integrator.sample_every", 1);
        }
    }
    if (s.integrator.dt > s.integrator.t_final) {
        fail(ScenarioErrorCode::invalid_value, "integrator.dt", "must be <= integrator.t_final");
    }

    s.output = doc.contains("output") ? read_string(*doc.get("output"), "output") : "results/" + s.name;
    if (s.output.empty()) {
        fail(ScenarioErrorCode::invalid_value, "output", "must be a non-empty base path");
    }
    if (const auto *n = doc.get("expected_verdict")) {
        auto v = parse_verdict(read_string(*n, "expected_verdict"));
        if (!v) {
            fail(ScenarioErrorCode::invalid_value, "expected_verdict", "must be pass, fail or informative");
        }
        s.expected_verdict = v;
    }

    const std::string section(to_string(s.experiment));
    const toml::table empty;
    const toml::table &t = doc.contains(section) ? read_table(*doc.get(section), section) : empty;
    auto field = [&section](std::string_view key) { return join(section, key); };
    switch (s.experiment) {
        case ExperimentId::pure_state_condition:
            check_keys(t, {"trials", "inject_state"}, section);
            if (const auto *v = t.get("trials")) {
                s.trials = read_count(*v, field("trials"), 1);
            }
            if (const auto *v = t.get("inject_state")) {
                s.inject_state = read_state(*v, field("inject_state"));
            }
            break;
        case ExperimentId::mixture_defect:
            check_keys(t, {"members"}, section);
            if (!t.contains("members")) {
                fail(ScenarioErrorCode::missing_field, field("members"), "required");
            }
            s.members = read_members(*t.get("members"), field("members"));
            break;
        case ExperimentId::no_signaling:
            check_keys(t, {"extensions", "random_pairs"}, section);
            if (const auto *v = t.get("extensions")) {
                const toml::array &arr = read_array(*v, field("extensions"));
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    s.extensions.push_back(read_state(*arr.get(i), index(field("extensions"), i)));
                }
            }
            if (const auto *v = t.get("random_pairs")) {
                s.random_pairs = read_count(*v, field("random_pairs"), 0);
            }
            break;
        case ExperimentId::linearity_criterion:
            check_keys(t, {"schmidt_weight"}, section);
            if (const auto *v = t.get("schmidt_weight")) {
                s.schmidt_weight = read_real(*v, field("schmidt_weight"));
            }
            break;
        case ExperimentId::decomposition_divergence:
            check_keys(t, {"state", "first", "second"}, section);
            if (const auto *v = t.get("state")) {
                s.state = read_state(*v, field("state"));
            }
            if (!t.contains("first") || !t.contains("second")) {
                fail(ScenarioErrorCode::missing_field, field(t.contains("first") ? "second" : "first"), "required");
            }
            s.first = read_decomposition(*t.get("first"), field("first"));
            s.second = read_decomposition(*t.get("second"), field("second"));
            break;
    }

    validate_scenario(s);
    return s;
}

inline Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read scenario file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

//------------------------------------------------------------------------------
// Canonical form
//------------------------------------------------------------------------------

namespace scenario_detail {

inline std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"':
                out += "\\\"";
                break;
            case '\\':
                out += "\\\\";
                break;
            case '\n':
                out += "\\n";
                break;
            case '\t':
                out += "\\t";
                break;
            default:
                out.push_back(c);
        }
    }
    return out + "\"";
}

/// Shortest round-trip text, always recognizable as a TOML number.
inline std::string real(double x) {
    return format_number(x);
}

inline std::string complex_list(const std::vector<Complex> &values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? ", [" : "[") + real(values[i].real()) + ", " + real(values[i].imag()) + "]";
    }
    return out + "]";
}

inline std::string real_list(const std::vector<double> &values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? ", " : "") + real(values[i]);
    }
    return out + "]";
}

inline std::string state_fields(const StateSpec &s) {
    switch (s.kind) {
        case StateSpec::Kind::named:
            return "name = " + quote(s.name) + ", params = " + real_list(s.params);
        case StateSpec::Kind::amplitudes:
            return "amplitudes = " + complex_list(s.values);
        case StateSpec::Kind::entries:
            return "entries = " + complex_list(s.values);
        case StateSpec::Kind::product: {
            std::string out = "product = [";
            for (std::size_t i = 0; i < s.factors.size(); ++i) {
                out += (i ? ", { " : "{ ") + state_fields(s.factors[i]) + " }";
            }
            return out + "]";
        }
    }
    return "";
}

inline std::string state(const StateSpec &s) {
    return "{ " + state_fields(s) + " }";
}

inline std::string members(const std::vector<MemberSpec> &ms) {
    std::string out = "[\n";
    for (const auto &m : ms) {
        out += "  { weight = " + real(m.weight) + ", " + state_fields(m.state) + " },\n";
    }
    return out + "]";
}

inline std::string decomposition(const DecompositionSpec &d) {
    switch (d.kind) {
        case DecompositionSpec::Kind::eigen:
            return "\"eigen\"";
        case DecompositionSpec::Kind::random:
            return "{ random = " + std::to_string(d.random_members) + " }";
        case DecompositionSpec::Kind::members:
            return members(d.members);
    }
    return "";
}

inline std::string op(const OperatorSpec &o) {
    switch (o.kind) {
        case OperatorSpec::Kind::pauli:
            return quote(o.expression);
        case OperatorSpec::Kind::entries:
            return "{ entries = " + complex_list(o.entries) + " }";
        case OperatorSpec::Kind::random:
            return "{ random = true }";
    }
    return "";
}

}  // namespace scenario_detail

/// Every field spelled out; parse_scenario(to_canonical_text(s)) == s.
inline std::string to_canonical_text(const Scenario &s) {
    using namespace scenario_detail;
    std::ostringstream out;
    out << "schema_version = " << s.schema_version << "\n";
    out << "experiment = " << quote(to_string(s.experiment)) << "\n";
    out << "name = " << quote(s.name) << "\n";
    out << "seed = " << s.seed << "\n";
    out << "q = " << real(s.q) << "\n";
    out << "hbar = " << real(s.hbar) << "\n";
    out << "generator = " << quote(to_string(s.generator)) << "\n";
    out << "dims = [";
    for (std::size_t i = 0; i < s.dims.size(); ++i) {
        out << (i ? ", " : "") << s.dims[i];
    }
    out << "]\n";
    out << "hamiltonians = [";
    for (std::size_t i = 0; i < s.hamiltonians.size(); ++i) {
        out << (i ? ", " : "") << op(s.hamiltonians[i]);
    }
    out << "]\n";
    out << "output = " << quote(s.output) << "\n";
    if (s.expected_verdict) {
        out << "expected_verdict = " << quote(to_string(*s.expected_verdict)) << "\n";
    }
    out << "\n[integrator]\n";
    out << "scheme = " << quote(to_string(s.integrator.scheme)) << "\n";
    out << "dt = " << real(s.integrator.dt) << "\n";
    out << "t_final = " << real(s.integrator.t_final) << "\n";
    out << "sample_every = " << s.integrator.sample_every << "\n";
    out << "\n[" << to_string(s.experiment) << "]\n";
    switch (s.experiment) {
        case ExperimentId::pure_state_condition:
            out << "trials = " << s.trials << "\n";
            if (s.inject_state) {
                out << "inject_state = " << state(*s.inject_state) << "\n";
            }
            break;
        case ExperimentId::mixture_defect:
            out << "members = " << members(s.members) << "\n";
            break;
        case ExperimentId::no_signaling:
            out << "extensions = [";
            for (std::size_t i = 0; i < s.extensions.size(); ++i) {
                out << (i ? ", " : "") << state(s.extensions[i]);
            }
            out << "]\n";
            out << "random_pairs = " << s.random_pairs << "\n";
            break;
        case ExperimentId::linearity_criterion:
            out << "schmidt_weight = " << real(s.schmidt_weight) << "\n";
            break;
        case ExperimentId::decomposition_divergence:
            if (s.state) {
                out << "state = " << state(*s.state) << "\n";
            }
            out << "first = " << decomposition(s.first) << "\n";
            out << "second = " << decomposition(s.second) << "\n";
            break;
    }
    return out.str();
}

//------------------------------------------------------------------------------
// Running
//------------------------------------------------------------------------------

/// Runs no_signaling_check on each random extension pair (plus the explicit
/// extensions, if any) and folds the results into one report: scalars and
/// series take the maximum over checks.
inline ExperimentReport aggregate_no_signaling(const std::vector<ExperimentReport> &checks) {
    if (checks.empty()) {
        throw std::invalid_argument("aggregate_no_signaling: no checks");
    }
    ExperimentReport out = checks.front();
    for (std::size_t c = 1; c < checks.size(); ++c) {
        for (auto &[key, value] : out.scalars) {
            value = std::max(value, checks[c].scalar(key).value());
        }
        for (std::size_t s = 0; s < out.series.size(); ++s) {
            for (std::size_t col = 0; col < out.series[s].columns.size(); ++col) {
                auto &dst = out.series[s].columns[col];
                const auto &src = checks[c].series[s].columns[col].second;
                if (dst.first.rfind("max_", 0) != 0) {
                    continue;
                }
                for (std::size_t k = 0; k < dst.second.size(); ++k) {
                    dst.second[k] = std::max(dst.second[k], src[k]);
                }
            }
        }
    }
    // purity_local belongs to a single check
    for (auto &series : out.series) {
        std::erase_if(series.columns, [](const auto &col) { return col.first.rfind("max_", 0) != 0; });
    }
    for (auto &[key, value] : out.parameters) {
        if (key == "extensions") {
            value = std::to_string(checks.size()) + " checks";
        }
    }
    out.verdict = evaluate_verdict(out);
    return out;
}

/// Random extension pairs for a two-part composite, one check per pair.
inline ExperimentReport no_signaling_random_pairs(const CompositeSpec &spec, std::size_t count, std::uint64_t seed,
                                                  const IntegratorConfig &cfg) {
    spec.validate();
    if (spec.parts.size() != 2) {
        throw ExperimentInputError("random extension pairs need exactly two parts");
    }
    std::vector<ExperimentReport> checks;
    for (auto &[purified, product] : random_extension_pairs(spec.parts[0].dim, spec.parts[1].dim, count, seed)) {
        checks.push_back(no_signaling_check({purified, product}, spec, cfg));
    }
    ExperimentReport out = aggregate_no_signaling(checks);
    out.parameters.emplace_back("random_pairs", std::to_string(count));
    out.parameters.emplace_back("seed", std::to_string(seed));
    return out;
}

inline EnsembleMixture resolve_decomposition(const DecompositionSpec &d, const DensityMatrix &rho, Rng &rng,
                                             const std::string &field) {
    switch (d.kind) {
        case DecompositionSpec::Kind::eigen:
            return eigen_mixture(rho);
        case DecompositionSpec::Kind::random:
            try {
                return random_decomposition(rho, d.random_members, rng);
            } catch (const std::exception &e) {
                scenario_detail::fail(ScenarioErrorCode::invalid_value, field, e.what());
            }
        case DecompositionSpec::Kind::members:
            return resolve_members(d.members, field);
    }
    throw std::logic_error("unknown decomposition kind");
}

/// Dispatches to the named experiment. Deterministic in (scenario, seed).
inline ExperimentReport run_scenario(const Scenario &scenario, std::optional<std::uint64_t> seed_override = {}) {
    Scenario s = scenario;
    if (seed_override) {
        s.seed = *seed_override;
    }
    validate_scenario(s);
    try {
        std::vector<ComplexMatrix> h;
        for (std::size_t k = 0; k < s.dims.size(); ++k) {
            h.push_back(resolve_operator(s.hamiltonians[k], s.dims[k], s.seed, k, "hamiltonians[" + std::to_string(k) + "]"));
        }
        auto local_spec = [&](std::size_t k) {
            return s.generator == GeneratorKind::linear ? GeneratorSpec::linear(h[k], s.hbar)
                                                        : GeneratorSpec::nonlinear(h[k], s.q, s.hbar);
        };
        auto composite = [&] {
            CompositeSpec c;
            for (std::size_t k = 0; k < s.dims.size(); ++k) {
                c.parts.push_back({local_spec(k), s.dims[k]});
            }
            return c;
        };

        ExperimentReport report;
        switch (s.experiment) {
            case ExperimentId::pure_state_condition: {
                PureStateOptions opts;
                opts.hbar = s.hbar;
                if (s.inject_state) {
                    opts.injected_state = resolve_state(*s.inject_state, "pure_state_condition.inject_state");
                }
                report = pure_state_condition_test(s.dims[0], h[0], s.q, s.integrator, s.trials, s.seed, opts);
                break;
            }
            case ExperimentId::mixture_defect:
                report = mixture_defect_experiment(resolve_members(s.members, "mixture_defect.members"), local_spec(0),
                                                   s.integrator);
                break;
            case ExperimentId::no_signaling: {
                std::vector<ExperimentReport> checks;
                const CompositeSpec spec = composite();
                if (!s.extensions.empty()) {
                    std::vector<DensityMatrix> ext;
                    for (std::size_t i = 0; i < s.extensions.size(); ++i) {
                        ext.push_back(resolve_state(s.extensions[i], "no_signaling.extensions[" + std::to_string(i) + "]"));
                    }
                    checks.push_back(no_signaling_check(ext, spec, s.integrator));
                }
                if (s.random_pairs > 0) {
                    for (auto &[purified, product] :
                         random_extension_pairs(s.dims[0], s.dims[1], s.random_pairs, s.seed)) {
                        checks.push_back(no_signaling_check({purified, product}, spec, s.integrator));
                    }
                }
                report = checks.size() == 1 ? checks.front() : aggregate_no_signaling(checks);
                report.parameters.emplace_back("random_pairs", std::to_string(s.random_pairs));
                report.parameters.emplace_back("seed", std::to_string(s.seed));
                break;
            }
            case ExperimentId::linearity_criterion:
                report = linearity_criterion_experiment(s.schmidt_weight, composite(), s.integrator);
                break;
            case ExperimentId::decomposition_divergence: {
                DensityMatrix rho =
                    s.state ? resolve_state(*s.state, "decomposition_divergence.state")
                            : density_from_mixture(resolve_members(s.first.members, "decomposition_divergence.first"));
                Rng rng(derive_seed(s.seed, 2'000'000));
                EnsembleMixture first = resolve_decomposition(s.first, rho, rng, "decomposition_divergence.first");
                EnsembleMixture second = resolve_decomposition(s.second, rho, rng, "decomposition_divergence.second");
                report = decomposition_divergence_experiment(rho, first, second, local_spec(0), s.integrator);
                report.parameters.emplace_back("seed", std::to_string(s.seed));
                break;
            }
        }
        report.parameters.insert(report.parameters.begin(), {"scenario", s.name});
        return report;
    } catch (const ScenarioError &) {
        throw;
    } catch (const std::exception &e) {
        throw ScenarioRunError(s.name, e.what());
    }
}

//------------------------------------------------------------------------------
// Report output
//------------------------------------------------------------------------------

inline nlohmann::ordered_json summary_json(const ExperimentReport &r, const std::string &stem = "") {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["experiment"] = r.name;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto &[k, v] : r.parameters) {
        params[k] = v;
    }
    j["parameters"] = params;
    nlohmann::ordered_json scalars = nlohmann::ordered_json::object();
    for (const auto &[k, v] : r.scalars) {
        scalars[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(format_number(v));
    }
    j["scalars"] = scalars;
    nlohmann::ordered_json rules = nlohmann::ordered_json::array();
    for (const auto &rule : r.rules) {
        rules.push_back({{"metric", rule.metric}, {"below", rule.tolerance}});
    }
    j["rules"] = rules;
    j["verdict"] = std::string(to_string(r.verdict));
    j["notes"] = r.notes;
    nlohmann::ordered_json series = nlohmann::ordered_json::array();
    for (const auto &s : r.series) {
        nlohmann::ordered_json cols = nlohmann::ordered_json::array();
        cols.push_back("t");
        for (const auto &c : s.columns) {
            cols.push_back(c.first);
        }
        series.push_back({{"name", s.name}, {"file", stem + "." + s.name + ".csv"}, {"columns", cols}});
    }
    j["series"] = series;
    return j;
}

/// Scalars, rules and verdict read back from a summary document; series
/// data stays in the CSV files.
inline ExperimentReport read_summary(const std::string &text) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
    ExperimentReport r;
    r.name = j.at("experiment").get<std::string>();
    for (const auto &[k, v] : j.at("parameters").items()) {
        r.parameters.emplace_back(k, v.get<std::string>());
    }
    for (const auto &[k, v] : j.at("scalars").items()) {
        r.scalars.emplace_back(k, v.is_number() ? v.get<double>() : std::stod(v.get<std::string>()));
    }
    for (const auto &rule : j.at("rules")) {
        r.rules.push_back({rule.at("metric").get<std::string>(), rule.at("below").get<double>()});
    }
    r.verdict = parse_verdict(j.at("verdict").get<std::string>()).value();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

inline std::string series_csv(const TimeSeries &s) {
    std::string out = "t";
    for (const auto &c : s.columns) {
        out += "," + c.first;
    }
    out += "\n";
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        out += format_number(s.times[k]);
        for (const auto &c : s.columns) {
            out += "," + format_number(c.second.at(k));
        }
        out += "\n";
    }
    return out;
}

/// Writes <base>.summary.json and one <base>.<series>.csv per time series.
/// Returns the written paths in that order.
inline std::vector<std::filesystem::path> emit_report(const ExperimentReport &r, const std::filesystem::path &base) {
    namespace fs = std::filesystem;
    if (base.has_parent_path()) {
        fs::create_directories(base.parent_path());
    }
    const std::string stem = base.filename().string();
    std::vector<fs::path> written;
    auto write = [&written](const fs::path &path, const std::string &content) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) {
            throw std::runtime_error("cannot write " + path.string());
        }
        written.push_back(path);
    };
    fs::path summary = base;
    summary += ".summary.json";
    write(summary, summary_json(r, stem).dump(2) + "\n");
    for (const auto &s : r.series) {
        fs::path csv = base;
        csv += "." + s.name + ".csv";
        write(csv, series_csv(s));
    }
    return written;
}

/// Human-readable summary for terminals.
inline std::string format_table(const ExperimentReport &r, const std::vector<std::filesystem::path> &files = {}) {
    std::ostringstream out;
    out << "experiment  " << r.name << "\n";
    for (const auto &[k, v] : r.parameters) {
        out << "  " << k << " = " << v << "\n";
    }
    out << "scalars\n";
    for (const auto &[k, v] : r.scalars) {
        out << "  " << k << " = " << format_number(v) << "\n";
    }
    for (const auto &rule : r.rules) {
        out << "rule        " << rule.metric << " < " << format_number(rule.tolerance) << "\n";
    }
    for (const auto &note : r.notes) {
        out << "note        " << note << "\n";
    }
    for (const auto &f : files) {
        out << "wrote       " << f.string() << "\n";
    }
    out << "verdict     " << to_string(r.verdict) << "\n";
    return out.str();
}

}  // namespace nlvn
