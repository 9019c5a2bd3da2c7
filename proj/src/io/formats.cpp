// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/io/formats.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "feelab/core/cpfp.h"
#include "feelab/core/epoch.h"
#include "feelab/core/rank.h"

namespace feelab {
namespace io {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("double formatting failed");
    return std::string(buf, ptr);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

json tx_to_json(const core::TxRecord& tx) {
    json j;
    j["tx_id"] = tx.tx_id;
    j["entry_ts"] = tx.entry_time;
    if (tx.confirm_time) j["confirm_ts"] = *tx.confirm_time;
    if (tx.confirm_height) j["confirm_height"] = *tx.confirm_height;
    j["fee_sats"] = tx.fee_sats;
    j["weight_wu"] = tx.weight_wu;
    j["vsize_vb"] = tx.vsize_vb;
    j["rbf"] = tx.rbf;
    j["n_inputs"] = tx.n_inputs;
    j["n_outputs"] = tx.n_outputs;
    j["total_output_sats"] = tx.total_output_sats;
    j["op_return"] = tx.has_op_return;
    j["inscription"] = tx.has_inscription;
    if (tx.respend_blocks) j["respend_blocks"] = *tx.respend_blocks;
    if (tx.cpfp_package) {
        j["cpfp"] = true;
        if (!tx.package_members.empty()) j["package_members"] = tx.package_members;
    }
    return j;
}

}  // namespace

void write_tx_file(const std::string& path, const std::vector<core::TxRecord>& txs) {
    std::ofstream out = open_out(path);
    for (const auto& tx : txs) {
        out << tx_to_json(tx).dump() << '\n';
    }
}

void write_snapshot_file(const std::string& path, const std::vector<core::Snapshot>& snaps) {
    std::ofstream out = open_out(path);
    out << "ts,mempool_bytes,tx_count,block_height,secs_since_last_block,blockspace_util\n";
    for (const auto& s : snaps) {
        out << s.ts << ',' << s.mempool_bytes << ',' << s.mempool_tx_count << ','
            << s.block_height << ',' << fmt_double(s.secs_since_last_block) << ','
            << fmt_double(s.blockspace_util) << '\n';
    }
}

void write_links_file(const std::string& path, const std::vector<core::ParentLink>& links) {
    std::ofstream out = open_out(path);
    out << "child_id,parent_id\n";
    for (const auto& [child, parent] : links) out << child << ',' << parent << '\n';
}

void write_external_weights_file(const std::string& path,
                                 const std::map<std::string, core::ExternalSize>& ext) {
    std::ofstream out = open_out(path);
    out << "tx_id,vsize_vb,weight_wu\n";
    for (const auto& [id, sz] : ext) {
        out << id << ',' << sz.vsize_vb << ',' << sz.weight_wu << '\n';
    }
}

void write_truth_file(const std::string& path, const sim::StructuralTruth& truth) {
    json j;
    j["alpha1"] = truth.alpha1;
    json coefs = json::object();
    for (const auto& [name, value] : truth.coefficients) coefs[name] = value;
    j["coefficients"] = coefs;
    j["grid"] = truth.grid;
    j["delay_curve"] = truth.delay_curve;
    j["cost"] = truth.cost;
    j["percentile"] = truth.percentile;
    j["log_slope"] = truth.log_slope;
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
}

std::vector<core::Snapshot> read_snapshot_file(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<core::Snapshot> snaps;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("ts,", 0) == 0) continue;  // header
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 6) throw std::runtime_error("snapshot row with wrong column count: " + line);
        core::Snapshot s;
        s.ts = std::stoll(f[0]);
        s.mempool_bytes = std::stoll(f[1]);
        s.mempool_tx_count = std::stoll(f[2]);
        s.block_height = std::stoll(f[3]);
        s.secs_since_last_block = std::stod(f[4]);
        s.blockspace_util = std::stod(f[5]);
        if (s.blockspace_util < 0.0 || s.blockspace_util > 1.0) {
            throw std::runtime_error("snapshot utilization outside [0,1]: " + line);
        }
        snaps.push_back(s);
    }
    return snaps;
}

std::vector<core::ParentLink> read_links_file(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<core::ParentLink> links;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("child_id", 0) == 0) continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("bad link row: " + line);
        links.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
    return links;
}

std::map<std::string, core::ExternalSize> read_external_weights_file(const std::string& path) {
    std::ifstream in = open_in(path);
    std::map<std::string, core::ExternalSize> ext;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("tx_id", 0) == 0) continue;
        }
        std::stringstream ss(line);
        std::string id, vs, wu;
        if (!std::getline(ss, id, ',') || !std::getline(ss, vs, ',') || !std::getline(ss, wu)) {
            throw std::runtime_error("bad external weight row: " + line);
        }
        ext[id] = core::ExternalSize{std::stoll(vs), std::stoll(wu)};
    }
    return ext;
}

IngestResult ingest(const std::string& tx_path, const std::string& snapshot_path,
                    const std::string& links_path, const std::string& external_weights_path,
                    const IngestOptions& options) {
    IngestResult res;

    std::vector<core::Snapshot> snaps = read_snapshot_file(snapshot_path);
    if (snaps.empty()) {
        throw std::runtime_error("no epoch state available: snapshot file is empty");
    }

    std::ifstream in = open_in(tx_path);
    std::vector<core::TxRecord> txs;
    std::string line;
    std::int64_t line_no = 0;
    auto record_error = [&](const std::string& what) {
        ++res.report.malformed_lines;
        if (res.report.line_errors.size() < 20) {
            res.report.line_errors.push_back("line " + std::to_string(line_no) + ": " + what);
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ++res.report.records_in;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object()) {
            record_error("not a JSON object");
            continue;
        }
        try {
            core::TxRecord tx;
            for (const char* req : {"tx_id", "entry_ts", "fee_sats", "weight_wu", "vsize_vb"}) {
                if (!j.contains(req)) throw std::runtime_error(std::string("missing field ") + req);
            }
            tx.tx_id = j.at("tx_id").get<std::string>();
            tx.entry_time = j.at("entry_ts").get<std::int64_t>();
            tx.fee_sats = j.at("fee_sats").get<std::int64_t>();
            tx.weight_wu = j.at("weight_wu").get<std::int64_t>();
            tx.vsize_vb = j.at("vsize_vb").get<std::int64_t>();
            if (tx.fee_sats < 0) throw std::runtime_error("negative fee");
            if (tx.vsize_vb <= 0 || tx.weight_wu <= 0) throw std::runtime_error("nonpositive size");
            if (tx.weight_wu < tx.vsize_vb || tx.weight_wu > 4 * tx.vsize_vb) {
                throw std::runtime_error("weight outside [vsize, 4*vsize]");
            }
            tx.fee_rate = core::Rational(tx.fee_sats, tx.vsize_vb);
            if (j.contains("confirm_ts")) tx.confirm_time = j["confirm_ts"].get<std::int64_t>();
            if (j.contains("confirm_height")) tx.confirm_height = j["confirm_height"].get<std::int64_t>();
            if (tx.confirm_time && *tx.confirm_time < tx.entry_time) {
                throw std::runtime_error("confirmation before entry");
            }
            tx.rbf = j.value("rbf", false);
            tx.n_inputs = j.value("n_inputs", std::int64_t{1});
            tx.n_outputs = j.value("n_outputs", std::int64_t{1});
            tx.total_output_sats = j.value("total_output_sats", std::int64_t{0});
            tx.has_op_return = j.value("op_return", false);
            tx.has_inscription = j.value("inscription", false);
            if (j.contains("respend_blocks")) {
                const double r = j["respend_blocks"].get<double>();
                if (r <= 0.0) throw std::runtime_error("nonpositive respend_blocks");
                tx.respend_blocks = r;
                tx.impatience = 1.0 / (r + options.eps_resp);
            }
            tx.cpfp_package = j.value("cpfp", false);
            if (j.contains("package_members")) {
                tx.package_members = j["package_members"].get<std::vector<std::string>>();
            }
            txs.push_back(std::move(tx));
        } catch (const std::exception& e) {
            record_error(e.what());
        }
    }

    if (res.report.records_in > 0) {
        const double frac = static_cast<double>(res.report.malformed_lines) /
                            static_cast<double>(res.report.records_in);
        if (frac > options.max_error_fraction) {
            throw std::runtime_error(
                "ingest aborted: malformed-line fraction " + fmt_double(frac) +
                " exceeds budget " + fmt_double(options.max_error_fraction));
        }
    }

    if (!external_weights_path.empty()) {
        auto ext = read_external_weights_file(external_weights_path);
        auto [corrected, report] = core::correct_weights(txs, ext);
        txs = std::move(corrected);
        res.report.weight_correction = report;
    }
    if (!links_path.empty()) {
        txs = core::collapse_cpfp(txs, read_links_file(links_path));
    }

    if (txs.empty()) {
        res.report.records_dropped = res.report.malformed_lines;
        return res;
    }
    auto assignment = core::assign_epochs(txs, snaps, options.window_secs, options.max_gap_secs);
    res.data.txs = std::move(assignment.txs);
    res.data.epochs = std::move(assignment.epochs);
    res.data.snapshots = std::move(snaps);
    res.report.dropped_no_state = assignment.dropped_no_state;
    res.report.imputed_states = assignment.imputed_states;
    res.report.records_kept = static_cast<std::int64_t>(res.data.txs.size());
    res.report.records_dropped = res.report.malformed_lines + assignment.dropped_no_state;
    core::rank_dataset(res.data);
    return res;
}

void write_delay_fit(const std::string& path, const stage1::DelayFit& fit,
                     const core::Dataset& data) {
    std::ofstream out = open_out(path);
    out << "feelab-delayfit\tv1\n";
    out << "#metrics\n";
    out << "oof_r2\t" << fmt_double(fit.oof_r2) << "\n";
    out << "oof_rmse\t" << fmt_double(fit.oof_rmse) << "\n";
    out << "n_scored\t" << fit.n_scored << "\n";
    out << "trivial_share\t" << fmt_double(fit.regime.trivial_share) << "\n";
    out << "#importance\n";
    const char* feat_names[] = {"percentile", "blockspace_util", "mempool_bytes",
                                "mempool_tx_count"};
    for (std::size_t f = 0; f < fit.feature_importance.size(); ++f) {
        out << feat_names[f] << '\t' << fmt_double(fit.feature_importance[f]) << '\n';
    }
    out << "#folds\n";
    for (std::size_t e = 0; e < fit.fold_of_epoch.size(); ++e) {
        out << data.epochs[e].epoch_id << '\t' << fit.fold_of_epoch[e] << '\n';
    }
    out << "#schedules\n";
    for (const auto& sched : fit.schedules) {
        if (sched.grid.empty()) continue;
        out << sched.epoch_id;
        for (double v : sched.values) out << '\t' << fmt_double(v);
        out << '\n';
    }
    out << "#regime\n";
    for (std::size_t e = 0; e < fit.regime.max_grid_slope.size(); ++e) {
        out << data.epochs[e].epoch_id << '\t' << fmt_double(fit.regime.max_grid_slope[e]) << '\t'
            << static_cast<int>(fit.regime.trivial[e]) << '\n';
    }
    out << "#slopes\n";
    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        if (i < fit.slope.size() && std::isfinite(fit.slope[i])) {
            out << data.txs[i].tx_id << '\t' << fmt_double(fit.predicted_log_wait[i]) << '\t'
                << fmt_double(fit.slope[i]) << '\n';
        }
    }
}

DelayArtifact read_delay_fit(const std::string& path) {
    std::ifstream in = open_in(path);
    DelayArtifact art;
    std::string line;
    if (!std::getline(in, line) || line.rfind("feelab-delayfit", 0) != 0) {
        throw std::runtime_error("not a delay-fit artifact: " + path);
    }
    std::string section;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            section = line;
            continue;
        }
        std::stringstream ss(line);
        if (section == "#metrics") {
            std::string key, value;
            std::getline(ss, key, '\t');
            std::getline(ss, value);
            if (key == "oof_r2") art.oof_r2 = std::stod(value);
            if (key == "oof_rmse") art.oof_rmse = std::stod(value);
            if (key == "trivial_share") art.trivial_share = std::stod(value);
        } else if (section == "#slopes") {
            std::string id, pred, slope;
            std::getline(ss, id, '\t');
            std::getline(ss, pred, '\t');
            std::getline(ss, slope);
            art.by_tx[id] = {std::stod(pred), std::stod(slope)};
        }
    }
    return art;
}

stage1::DelayFit delay_fit_for_dataset(const DelayArtifact& artifact, const core::Dataset& data) {
    stage1::DelayFit fit;
    fit.predicted_log_wait.assign(data.txs.size(), std::numeric_limits<double>::quiet_NaN());
    fit.slope.assign(data.txs.size(), std::numeric_limits<double>::quiet_NaN());
    fit.oof_r2 = artifact.oof_r2;
    fit.oof_rmse = artifact.oof_rmse;
    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        auto it = artifact.by_tx.find(data.txs[i].tx_id);
        if (it != artifact.by_tx.end()) {
            fit.predicted_log_wait[i] = it->second.first;
            fit.slope[i] = it->second.second;
        }
    }
    return fit;
}

namespace {

json fee_fit_to_json(const stage2::FeeFit& fit) {
    json j;
    j["names"] = fit.names;
    std::vector<double> coef(fit.coef.data(), fit.coef.data() + fit.coef.size());
    j["coef"] = coef;
    std::vector<std::vector<double>> vcov;
    for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
        std::vector<double> row;
        for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) row.push_back(fit.vcov(r, c));
        vcov.push_back(std::move(row));
    }
    j["vcov"] = vcov;
    j["alpha0"] = fit.alpha0;
    json xi = json::array();
    for (const auto& [id, v] : fit.xi) xi.push_back({id, v});
    j["xi"] = xi;
    j["psi"] = fit.psi;
    j["r2_within"] = fit.r2_within;
    j["r2_overall"] = fit.r2_overall;
    j["n_rows"] = fit.n_rows;
    j["n_clusters"] = fit.n_clusters;
    j["df_t"] = fit.df_t;
    j["excluded_below_floor"] = fit.excluded_below_floor;
    j["excluded_missing"] = fit.excluded_missing;
    j["has_spline"] = fit.has_spline;
    j["spline_begin"] = fit.spline_begin;
    j["spline_count"] = fit.spline_count;
    j["spline_knots"] = fit.spline_knots;
    j["spline_degree"] = fit.spline_degree;
    // Impatience distribution compressed to a quantile grid.
    json iq = json::array();
    if (!fit.impatience_sorted.empty()) {
        const auto& s = fit.impatience_sorted;
        for (int q = 0; q <= 1000; ++q) {
            const double pos = static_cast<double>(q) / 1000.0 * static_cast<double>(s.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, s.size() - 1);
            const double frac = pos - static_cast<double>(lo);
            iq.push_back(s[lo] * (1.0 - frac) + s[hi] * frac);
        }
    }
    j["impatience_quantiles"] = iq;
    json spec;
    spec["use_fixed_effects"] = fit.spec.use_fixed_effects;
    spec["include_slope"] = fit.spec.include_slope;
    spec["include_tx_controls"] = fit.spec.include_tx_controls;
    spec["include_state_controls"] = fit.spec.include_state_controls;
    spec["use_spline"] = fit.spec.use_spline;
    spec["fee_floor_sat_vb"] = fit.spec.fee_floor_sat_vb;
    spec["slope_floor"] = fit.spec.slope_floor;
    j["spec"] = spec;
    return j;
}

}  // namespace

void write_fee_fit(const std::string& path, const stage2::FeeFit& fit) {
    std::ofstream out = open_out(path);
    out << fee_fit_to_json(fit).dump(2) << '\n';
}

stage2::FeeFit read_fee_fit(const std::string& path) {
    std::ifstream in = open_in(path);
    json j;
    in >> j;
    stage2::FeeFit fit;
    fit.names = j.at("names").get<std::vector<std::string>>();
    const auto coef = j.at("coef").get<std::vector<double>>();
    fit.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    const auto vcov = j.at("vcov").get<std::vector<std::vector<double>>>();
    fit.vcov.resize(static_cast<Eigen::Index>(vcov.size()), static_cast<Eigen::Index>(vcov.size()));
    for (std::size_t r = 0; r < vcov.size(); ++r) {
        for (std::size_t c = 0; c < vcov[r].size(); ++c) {
            fit.vcov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vcov[r][c];
        }
    }
    fit.alpha0 = j.at("alpha0").get<double>();
    for (const auto& pair : j.at("xi")) {
        fit.xi.emplace_back(pair.at(0).get<std::int64_t>(), pair.at(1).get<double>());
    }
    fit.psi = j.at("psi").get<double>();
    fit.r2_within = j.at("r2_within").get<double>();
    fit.r2_overall = j.at("r2_overall").get<double>();
    fit.n_rows = j.at("n_rows").get<std::int64_t>();
    fit.n_clusters = j.at("n_clusters").get<std::int64_t>();
    fit.df_t = j.at("df_t").get<double>();
    fit.excluded_below_floor = j.at("excluded_below_floor").get<std::int64_t>();
    fit.excluded_missing = j.at("excluded_missing").get<std::int64_t>();
    fit.has_spline = j.at("has_spline").get<bool>();
    fit.spline_begin = j.at("spline_begin").get<std::size_t>();
    fit.spline_count = j.at("spline_count").get<std::size_t>();
    fit.spline_knots = j.at("spline_knots").get<std::vector<double>>();
    fit.spline_degree = j.at("spline_degree").get<int>();
    fit.impatience_sorted = j.at("impatience_quantiles").get<std::vector<double>>();
    const auto& spec = j.at("spec");
    fit.spec.use_fixed_effects = spec.at("use_fixed_effects").get<bool>();
    fit.spec.include_slope = spec.at("include_slope").get<bool>();
    fit.spec.include_tx_controls = spec.at("include_tx_controls").get<bool>();
    fit.spec.include_state_controls = spec.at("include_state_controls").get<bool>();
    fit.spec.use_spline = spec.at("use_spline").get<bool>();
    fit.spec.fee_floor_sat_vb = spec.at("fee_floor_sat_vb").get<double>();
    fit.spec.slope_floor = spec.at("slope_floor").get<double>();
    return fit;
}

namespace {

// Two-sided p-value from a t statistic with df degrees of freedom, via the
// regularized incomplete beta continued fraction.
double betacf(double a, double b, double x) {
    const int max_it = 200;
    const double eps = 3e-12;
    const double fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_it; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double ibeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double t_pvalue(double t, double df) {
    const double x = df / (df + t * t);
    return ibeta(df / 2.0, 0.5, x);
}

const char* stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

}  // namespace

void write_coef_table(const std::string& path, const stage2::FeeFit& fit) {
    std::ofstream out = open_out(path);
    out << "variable\testimate\tcluster_se\tt\tp\tsig\n";
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const double se = fit.se(j);
        const double t = se > 0.0 ? fit.tstat(j) : 0.0;
        const double p = se > 0.0 ? t_pvalue(t, fit.df_t) : 1.0;
        out << fit.names[j] << '\t' << fmt_double(fit.coef(static_cast<Eigen::Index>(j))) << '\t'
            << fmt_double(se) << '\t' << fmt_double(t) << '\t' << fmt_double(p) << '\t'
            << stars(p) << '\n';
    }
    out << "intercept_alpha0\t" << fmt_double(fit.alpha0) << "\t\t\t\t\n";
    out << "# epochs\t" << fit.n_clusters << "\t\t\t\t\n";
    out << "# rows\t" << fit.n_rows << "\t\t\t\t\n";
    out << "# r2_within\t" << fmt_double(fit.r2_within) << "\t\t\t\t\n";
    out << "# r2_overall\t" << fmt_double(fit.r2_overall) << "\t\t\t\t\n";
    out << "# smearing_psi\t" << fmt_double(fit.psi) << "\t\t\t\t\n";
    out << "# t_df\t" << fmt_double(fit.df_t) << "\t\t\t\t\n";
}

void write_bootstrap_result(const std::string& path, const stage2::BootstrapResult& res) {
    json j;
    j["names"] = res.names;
    std::vector<double> point(res.point.data(), res.point.data() + res.point.size());
    j["point"] = point;
    std::vector<double> sd(res.sd_se.data(), res.sd_se.data() + res.sd_se.size());
    j["sd_se"] = sd;
    std::vector<double> pct(res.percentile_se.data(),
                            res.percentile_se.data() + res.percentile_se.size());
    j["percentile_se"] = pct;
    j["requested"] = res.requested;
    j["failed"] = res.failed;
    j["seed"] = res.seed;
    json reps = json::array();
    for (const auto& r : res.replicates) {
        reps.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    }
    j["replicates"] = reps;
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_fitted_vs_actual(const std::string& path, const stage2::FeeDesign& design,
                            const stage2::FeeFit& fit, std::size_t max_rows) {
    std::ofstream out = open_out(path);
    out << "actual_log_fee_rate,fitted_log_fee_rate\n";
    std::map<std::int64_t, double> xi(fit.xi.begin(), fit.xi.end());
    const std::size_t n = static_cast<std::size_t>(design.x.rows());
    const std::size_t step = std::max<std::size_t>(1, n / std::max<std::size_t>(1, max_rows));
    for (std::size_t i = 0; i < n; i += step) {
        double mu = fit.alpha0;
        auto it = xi.find(design.cluster_of[i]);
        if (it != xi.end()) mu += it->second;
        mu += design.x.row(static_cast<Eigen::Index>(i)).dot(fit.coef);
        out << fmt_double(design.y(static_cast<Eigen::Index>(i))) << ',' << fmt_double(mu) << '\n';
    }
}

void write_residual_hist(const std::string& path, const stage2::FeeFit& fit, int bins) {
    if (fit.residuals.empty() || bins < 1) throw std::invalid_argument("nothing to bin");
    double lo = fit.residuals[0], hi = fit.residuals[0];
    for (double r : fit.residuals) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    if (hi <= lo) hi = lo + 1e-12;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (double r : fit.residuals) {
        auto b = static_cast<std::size_t>(static_cast<double>(bins) * (r - lo) / (hi - lo));
        if (b >= counts.size()) b = counts.size() - 1;
        ++counts[b];
    }
    std::ofstream out = open_out(path);
    out << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b) {
        const double w = (hi - lo) / bins;
        out << fmt_double(lo + b * w) << ',' << fmt_double(lo + (b + 1) * w) << ','
            << counts[static_cast<std::size_t>(b)] << '\n';
    }
}

void write_coef_ci(const std::string& path, const stage2::FeeFit& fit) {
    std::ofstream out = open_out(path);
    out << "variable,estimate,ci_lo,ci_hi\n";
    constexpr double z975 = 1.959963984540054;
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const double c = fit.coef(static_cast<Eigen::Index>(j));
        const double se = fit.se(j);
        out << fit.names[j] << ',' << fmt_double(c) << ',' << fmt_double(c - z975 * se) << ','
            << fmt_double(c + z975 * se) << '\n';
    }
}

}  // namespace io
}  // namespace feelab
