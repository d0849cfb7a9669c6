// Copyright 2026 The hqdl Authors
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

#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

namespace hqdl::cli {

namespace ex = hqdl::experiments;

namespace {

std::string where(const std::string &source, const YAML::Mark &m) {
    if (m.is_null()) {
        return source + ": ";
    }
    return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

/// One YAML mapping with typed, location-aware accessors. Keys that are
/// never read are reported by finish().
class Section {
  public:
    Section(YAML::Node node, std::string source, std::string path)
        : node_(std::move(node)), source_(std::move(source)), path_(std::move(path)) {
        if (!node_.IsMap()) {
            error(node_, (path_.empty() ? std::string("configuration") : "'" + path_ + "'") + " must be a mapping");
        }
    }

    [[noreturn]] void error(const YAML::Node &n, const std::string &msg) const {
        throw ConfigError(where(source_, n.Mark()) + msg);
    }

    [[nodiscard]] bool has(const std::string &key) const { return static_cast<bool>(node_[key]); }

    YAML::Node node(const std::string &key) {
        used_.insert(key);
        return node_[key];
    }

    std::string name(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void read(const std::string &key, T &out) {
        if (has(key)) {
            out = convert<T>(node(key), key);
        }
    }

    template <class T>
    void read_grid(const std::string &key, std::vector<T> &out) {
        if (!has(key)) {
            return;
        }
        const YAML::Node n = node(key);
        std::vector<T> v;
        if (n.IsSequence()) {
            for (const auto &item : n) {
                v.push_back(convert<T>(item, key));
            }
        } else {
            v.push_back(convert<T>(n, key));
        }
        if (v.empty()) {
            error(n, "'" + name(key) + "' must not be empty");
        }
        out = std::move(v);
    }

    /// Enforces `ok` on an already-read key, pointing at its node.
    void check(const std::string &key, bool ok, const std::string &msg) const {
        if (!ok && has(key)) {
            error(node_[key], "'" + name(key) + "' " + msg);
        }
    }

    Section child(const std::string &key) { return Section(node(key), source_, name(key)); }

    void finish() const {
        for (const auto &kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!used_.count(k)) {
                error(kv.first, "unknown key '" + name(k) + "'");
            }
        }
    }

    [[nodiscard]] const std::string &source() const { return source_; }

    template <class T>
    T convert(const YAML::Node &n, const std::string &key) const {
        if (!n.IsScalar()) {
            error(n, "'" + name(key) + "' must be a scalar");
        }
        const std::string s = n.Scalar();
        try {
            if constexpr (std::is_same_v<T, std::string>) {
                return s;
            } else if constexpr (std::is_same_v<T, bool>) {
                return n.as<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                std::size_t used = 0;
                if (s.empty() || s[0] == '-' || s[0] == '+') {
                    throw std::invalid_argument(s);
                }
                const unsigned long long v = std::stoull(s, &used, 0);
                if (used != s.size() || v > std::numeric_limits<T>::max()) {
                    throw std::invalid_argument(s);
                }
                return static_cast<T>(v);
            } else {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size() || !std::isfinite(v)) {
                    throw std::invalid_argument(s);
                }
                return v;
            }
        } catch (const std::exception &) {
            const char *kind = std::is_same_v<T, bool>   ? "a boolean"
                               : std::is_integral_v<T> ? "a non-negative integer"
                                                       : "a finite number";
            error(n, "'" + name(key) + "' must be " + kind + ", got '" + s + "'");
        }
    }

  private:
    YAML::Node node_;
    std::string source_;
    std::string path_;
    std::set<std::string> used_;
};

template <class Fn>
auto enum_value(Section &s, const std::string &key, Fn parse) {
    const YAML::Node n = s.node(key);
    const std::string v = s.convert<std::string>(n, key);
    try {
        return parse(v);
    } catch (const Error &e) {
        s.error(n, "'" + s.name(key) + "': " + e.what());
    }
}

void read_noise(Section &s, NoiseMode &out) {
    if (s.has("noise")) {
        out = enum_value(s, "noise", parse_noise_mode);
    }
}

void read_seeds(Section &s, std::vector<std::uint64_t> &out) {
    if (s.has("seed") && s.has("seeds")) {
        s.error(s.node("seeds"), "give either 'seed' or 'seeds', not both");
    }
    s.read_grid("seed", out);
    s.read_grid("seeds", out);
}

void read_precisions(Section &s, const std::string &key, std::vector<double> &out) {
    s.read_grid(key, out);
    s.check(key, std::all_of(out.begin(), out.end(), [](double v) { return v > 0.0 && v < 1.0; }),
            "entries must lie in (0, 1)");
}

void read_dims(Section &s, const std::string &key, std::vector<std::size_t> &out, std::size_t min) {
    s.read_grid(key, out);
    s.check(key, std::all_of(out.begin(), out.end(), [min](std::size_t v) { return v >= min; }),
            "entries must be >= " + std::to_string(min));
}

void read_common(Section &s, ex::SweepCommon &spec) {
    read_dims(s, "dims", spec.dims, 2);
    read_seeds(s, spec.seeds);
    read_noise(s, spec.noise);
    s.read("decay", spec.decay);
    s.check("decay", spec.decay > 0.5, "must exceed 0.5");
    if (s.has("baseline")) {
        Section b = s.child("baseline");
        if (b.has("model")) {
            spec.baseline.model = enum_value(b, "model", ex::parse_baseline_model);
        }
        b.read("input_dim", spec.baseline.input_dim);
        b.read("tokens", spec.baseline.tokens);
        b.finish();
    }
    if (s.has("task")) {
        const YAML::Node n = s.node("task");
        if (n.IsScalar()) {
            if (s.convert<bool>(n, "task")) {
                spec.task = ex::TaskOptions{};
            }
        } else {
            Section t = s.child("task");
            ex::TaskOptions o;
            t.read("samples", o.n_samples);
            t.read("separation", o.separation);
            t.read_grid("informative", o.informative);
            t.check("samples", o.n_samples >= 4, "must be >= 4");
            t.finish();
            spec.task = o;
        }
    }
}

ex::DcdSweepSpec parse_dcd(Section &s) {
    ex::DcdSweepSpec spec;
    read_common(s, spec);
    s.read_grid("ranks", spec.ranks);
    s.check("ranks", std::all_of(spec.ranks.begin(), spec.ranks.end(), [](auto r) { return r >= 1; }),
            "entries must be >= 1");
    read_precisions(s, "deltas", spec.deltas);
    return spec;
}

ex::TomoSweepSpec parse_tomo(Section &s) {
    ex::TomoSweepSpec spec;
    read_common(s, spec);
    read_precisions(s, "epsilons", spec.epsilons);
    s.read("c_tomo", spec.c_tomo);
    s.check("c_tomo", spec.c_tomo > 0.0, "must be positive");
    return spec;
}

ex::BlockSpec parse_block(Section &s, const std::filesystem::path &base) {
    ex::BlockSpec spec;
    if (s.has("block")) {
        spec.kind = enum_value(s, "block", [](const std::string &v) {
            if (v == "resnet") return ex::BlockKind::Resnet;
            if (v == "transformer") return ex::BlockKind::Transformer;
            fail(ErrorCode::InvalidArgument, "unknown block '" + v + "' (expected resnet or transformer)");
        });
    }
    for (auto [key, field] : {std::pair{"B", &spec.B}, {"C", &spec.C}, {"H", &spec.H}, {"W", &spec.W},
                              {"K", &spec.K}, {"N", &spec.N}, {"d", &spec.d}, {"heads", &spec.heads},
                              {"d_ff", &spec.d_ff}}) {
        s.read(key, *field);
        s.check(key, *field > 0, "must be positive");
    }
    s.check("K", spec.K % 2 == 1, "must be odd");
    if (s.has("protocol")) {
        spec.protocol = enum_value(s, "protocol", parse_protocol);
    }
    s.read("rank", spec.rank);
    if (s.has("noise")) {
        const YAML::Node n = s.node("noise");
        spec.noises.clear();
        const auto parse_one = [&](const YAML::Node &item) {
            try {
                spec.noises.push_back(parse_noise_mode(s.convert<std::string>(item, "noise")));
            } catch (const Error &e) {
                s.error(item, std::string("'noise': ") + e.what());
            }
        };
        if (n.IsSequence()) {
            for (const auto &item : n) {
                parse_one(item);
            }
        } else {
            parse_one(n);
        }
        if (spec.noises.empty()) {
            s.error(n, "'noise' must not be empty");
        }
    }
    read_precisions(s, "precisions", spec.precisions);
    read_seeds(s, spec.seeds);
    s.read("instance_seed", spec.instance_seed);
    if (s.has("weights")) {
        const YAML::Node n = s.node("weights");
        std::filesystem::path p = s.convert<std::string>(n, "weights");
        if (p.is_relative()) {
            p = base / p;
        }
        try {
            spec.weights = csv::read_matrix_file(p.string());
        } catch (const Error &e) {
            s.error(n, std::string("weights: ") + e.what());
        }
    }
    return spec;
}

ex::GradcheckSpec parse_gradcheck(Section &s) {
    ex::GradcheckSpec spec;
    s.read("m", spec.m);
    s.read("n", spec.n);
    s.read("N", spec.N);
    for (const char *k : {"m", "n", "N"}) {
        s.check(k, *(k[0] == 'm' ? &spec.m : k[0] == 'n' ? &spec.n : &spec.N) > 0, "must be positive");
    }
    read_seeds(s, spec.seeds);
    read_noise(s, spec.noise);
    s.read("delta", spec.delta);
    s.check("delta", spec.delta > 0.0 && spec.delta < 1.0, "must lie in (0, 1)");
    s.read("identity", spec.identity);
    s.check("identity", !spec.identity || spec.m == spec.n, "needs m == n");
    if (s.has("corrupt")) {
        std::vector<std::size_t> ij;
        s.read_grid("corrupt", ij);
        s.check("corrupt", ij.size() == 2 && ij[0] < spec.m && ij[1] < spec.n,
                "must be an index [i, j] inside dW");
        spec.corrupt = {{ij[0], ij[1]}};
    }
    s.read("step", spec.step);
    s.check("step", spec.step > 0.0, "must be positive");
    s.read("tolerance", spec.tolerance);
    s.check("tolerance", spec.tolerance > 0.0, "must be positive");
    return spec;
}

ex::QramFitSpec parse_qram(Section &s, const std::filesystem::path &base, const Overrides &flags) {
    ex::QramFitSpec spec;
    if (s.has("data")) {
        const YAML::Node n = s.node("data");
        std::filesystem::path p = s.convert<std::string>(n, "data");
        if (p.is_relative()) {
            p = base / p;
        }
        try {
            for (const auto &row : csv::read_table_file(p.string())) {
                require(row.size() == 3, ErrorCode::InvalidArgument, "rows must be n,k,infidelity");
                spec.data.push_back({row[0], row[1], row[2]});
            }
            require(!spec.data.empty(), ErrorCode::InvalidArgument, "no data rows");
        } catch (const Error &e) {
            s.error(n, std::string("data: ") + e.what());
        }
    }
    s.read("kappa", spec.planted.kappa);
    s.read("c0", spec.planted.c0);
    s.read("noise_level", spec.relative_noise);
    s.check("noise_level", spec.relative_noise >= 0.0, "must be non-negative");
    NoiseMode mode = NoiseMode::Bounded;
    read_noise(s, mode);
    if (flags.noise) {
        mode = *flags.noise;
    }
    if (mode == NoiseMode::Exact) {
        spec.relative_noise = 0.0;
    }
    s.read("seed", spec.seed);
    if (flags.seed) {
        spec.seed = *flags.seed;
    }
    s.read_grid("n", spec.ns);
    s.read_grid("k", spec.ks);
    return spec;
}

ex::OverheadSpec parse_overhead(Section &s) {
    ex::OverheadSpec spec;
    s.read_grid("channels", spec.channels);
    s.read_grid("kernels", spec.kernels);
    s.read("spatial", spec.spatial);
    read_dims(s, "dims", spec.dims, 2);
    s.read("tokens", spec.tokens);
    read_dims(s, "token_grid", spec.token_grid, 2);
    s.read("token_dim", spec.token_dim);
    s.read("heads", spec.heads);
    read_noise(s, spec.noise);
    s.read("seed", spec.seed);
    return spec;
}

template <class S>
void apply_grid_flags(S &spec, const Overrides &flags) {
    if (flags.seed) {
        spec.seeds = {*flags.seed};
    }
    if (flags.noise) {
        spec.noise = *flags.noise;
    }
    if (flags.jobs) {
        spec.jobs = *flags.jobs;
    }
}

} // namespace

const std::vector<std::string> &command_names() {
    static const std::vector<std::string> names{"dcd-sweep", "tomo-sweep", "block",
                                                "gradcheck", "qram-fit",   "overhead-report"};
    return names;
}

Experiment parse_experiment(const std::string &command, const std::string &text, const std::string &source,
                            const Overrides &flags) {
    const auto &names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        throw ConfigError("unknown command '" + command + "'");
    }
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception &e) {
        throw ConfigError(where(source, e.mark) + e.msg);
    }
    if (root.IsNull()) {
        root = YAML::Node(YAML::NodeType::Map);
    }
    Section s(root, source, "");
    const std::filesystem::path base = std::filesystem::path(source).parent_path();

    Experiment e;
    e.command = command;
    if (s.has("command")) {
        const YAML::Node n = s.node("command");
        if (s.convert<std::string>(n, "command") != command) {
            s.error(n, "config is for '" + n.Scalar() + "', not '" + command + "'");
        }
    }
    std::size_t jobs = 1;
    s.read("jobs", jobs);
    s.check("jobs", jobs >= 1, "must be >= 1");
    s.read("out", e.out);

    if (command == "dcd-sweep") {
        auto spec = parse_dcd(s);
        spec.jobs = jobs;
        apply_grid_flags(spec, flags);
        e.spec = spec;
    } else if (command == "tomo-sweep") {
        auto spec = parse_tomo(s);
        spec.jobs = jobs;
        apply_grid_flags(spec, flags);
        e.spec = spec;
    } else if (command == "block") {
        auto spec = parse_block(s, base);
        spec.jobs = jobs;
        if (flags.seed) {
            spec.seeds = {*flags.seed};
        }
        if (flags.noise) {
            spec.noises = {*flags.noise};
        }
        if (flags.jobs) {
            spec.jobs = *flags.jobs;
        }
        e.spec = spec;
    } else if (command == "gradcheck") {
        auto spec = parse_gradcheck(s);
        if (flags.seed) {
            spec.seeds = {*flags.seed};
        }
        if (flags.noise) {
            spec.noise = *flags.noise;
        }
        e.spec = spec;
    } else if (command == "qram-fit") {
        e.spec = parse_qram(s, base, flags);
    } else {
        auto spec = parse_overhead(s);
        spec.jobs = jobs;
        if (flags.seed) {
            spec.seed = *flags.seed;
        }
        if (flags.noise) {
            spec.noise = *flags.noise;
        }
        if (flags.jobs) {
            spec.jobs = *flags.jobs;
        }
        e.spec = spec;
    }
    s.finish();
    if (flags.out) {
        e.out = *flags.out;
    }

    try {
        std::visit([](const auto &spec) { spec.validate(); }, e.spec);
        if (const auto *b = std::get_if<ex::BlockSpec>(&e.spec)) {
            (void)ex::BlockInstance::make(*b);
        }
    } catch (const Error &err) {
        throw ConfigError(source + ": " + err.what());
    }
    if (!e.out.empty()) {
        std::ofstream probe(e.out, std::ios::app);
        if (!probe) {
            throw ConfigError("output path '" + e.out + "' is not writable");
        }
    }
    return e;
}

Experiment load_experiment(const std::string &command, const std::string &path, const Overrides &flags) {
    if (path.empty()) {
        return parse_experiment(command, "", "<defaults>", flags);
    }
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment(command, buf.str(), path, flags);
}

ex::Table run(const Experiment &e) {
    return std::visit(
        [](const auto &spec) -> ex::Table {
            using S = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<S, ex::DcdSweepSpec>) return ex::dcd_sweep(spec);
            else if constexpr (std::is_same_v<S, ex::TomoSweepSpec>) return ex::tomo_sweep(spec);
            else if constexpr (std::is_same_v<S, ex::BlockSpec>) return ex::block(spec);
            else if constexpr (std::is_same_v<S, ex::GradcheckSpec>) return ex::gradcheck(spec);
            else if constexpr (std::is_same_v<S, ex::QramFitSpec>) return ex::qram_fit(spec);
            else return ex::overhead_report(spec);
        },
        e.spec);
}

bool failed(const Experiment &e, const ex::Table &t) {
    return std::holds_alternative<ex::GradcheckSpec>(e.spec) && !ex::all_pass(t);
}

Format parse_format(const std::string &s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

void write_table(const ex::Table &t, std::ostream &out, Format format) {
    if (format == Format::Csv) {
        t.write_csv(out);
        return;
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto &r : t.rows) {
        nlohmann::ordered_json obj;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const std::string &cell = r[c];
            if (cell.empty()) {
                obj[t.columns[c]] = nullptr;
                continue;
            }
            char *end = nullptr;
            errno = 0;
            if (std::all_of(cell.begin(), cell.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
                const unsigned long long n = std::strtoull(cell.c_str(), &end, 10);
                if (end == cell.c_str() + cell.size() && errno != ERANGE) {
                    obj[t.columns[c]] = n;
                    continue;
                }
            }
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() + cell.size()) {
                obj[t.columns[c]] = v;
            } else {
                obj[t.columns[c]] = cell;
            }
        }
        rows.push_back(std::move(obj));
    }
    out << rows.dump(2) << '\n';
}

} // namespace hqdl::cli
