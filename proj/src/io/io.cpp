#include "quilt/io/io.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace quilt::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& column_names) {
    if (static_cast<long>(column_names.size()) != m.cols())
        throw ValidationError("write_matrix_csv: one name per column required");
    std::ofstream out = open_out(path);
    for (std::size_t j = 0; j < column_names.size(); ++j)
        out << (j ? "," : "") << column_names[j];
    out << '\n';
    for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::vector<std::string> names;
    for (long j = 0; j < m.cols(); ++j) names.push_back("v" + std::to_string(j + 1));
    write_matrix_csv(path, m, names);
}

CsvMatrix read_matrix_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty file: " + path);
    CsvMatrix out;
    out.column_names = split_csv_line(line);
    const std::size_t cols = out.column_names.size();
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != cols)
            throw IoError(path + ": row " + std::to_string(rows + 2) +
                          " has wrong field count");
        for (const std::string& f : fields) {
            try {
                values.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw IoError(path + ": not a number: '" + f + "'");
            }
        }
        ++rows;
    }
    out.values.resize(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out.values(i, j) = values[i * cols + j];
    return out;
}

void write_mask_csv(const std::string& path, const PairMask& mask) {
    std::ofstream out = open_out(path);
    for (int j = 0; j < mask.p(); ++j) out << (j ? "," : "") << 'v' << (j + 1);
    out << '\n';
    for (int i = 0; i < mask.p(); ++i) {
        for (int j = 0; j < mask.p(); ++j)
            out << (j ? "," : "") << (mask.observed(i, j) ? 1 : 0);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

PairMask read_mask_csv(const std::string& path) {
    const CsvMatrix raw = read_matrix_csv(path);
    const int p = static_cast<int>(raw.values.rows());
    if (raw.values.cols() != p) throw IoError(path + ": mask must be square");
    BoolMatrix obs(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            const double v = raw.values(i, j);
            if (v != 0.0 && v != 1.0) throw IoError(path + ": mask entries must be 0/1");
            obs(i, j) = v == 1.0;
        }
    return PairMask(p, std::move(obs));
}

void write_edges_csv(const std::string& path, const EdgeSet& edges) {
    std::ofstream out = open_out(path);
    out << "i,j\n";
    for (const auto& [i, j] : edges.pairs()) out << (i + 1) << ',' << (j + 1) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

EdgeSet read_edges_csv(const std::string& path, int p) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty file: " + path);
    EdgeSet edges(p);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 2) throw IoError(path + ": edge rows need two fields");
        edges.insert(std::stoi(fields[0]) - 1, std::stoi(fields[1]) - 1);
    }
    return edges;
}

void write_design_json(const std::string& path, const BlockDesign& design) {
    nlohmann::json j;
    j["p"] = design.p();
    nlohmann::json blocks = nlohmann::json::array();
    for (int k = 0; k < design.num_blocks(); ++k) {
        nlohmann::json b = nlohmann::json::array();
        for (int idx : design.block(k)) b.push_back(idx + 1);
        blocks.push_back(std::move(b));
    }
    j["blocks"] = std::move(blocks);
    j["sample_sizes"] = design.sample_sizes();
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

BlockDesign read_design_json(const std::string& path) {
    const nlohmann::json j = load_json(path);
    require_keys(j, {"p", "blocks", "sample_sizes"}, path);
    if (!j.contains("p") || !j.contains("blocks") || !j.contains("sample_sizes"))
        throw ValidationError(path + ": design needs p, blocks, sample_sizes");
    const int p = j.at("p").get<int>();
    std::vector<std::vector<int>> blocks;
    for (const auto& b : j.at("blocks")) {
        std::vector<int> block;
        for (const auto& idx : b) block.push_back(idx.get<int>() - 1);
        blocks.push_back(std::move(block));
    }
    return BlockDesign(p, std::move(blocks), j.at("sample_sizes").get<std::vector<int>>());
}

namespace {

void write_metric_fields(std::ostream& out, const RecoveryMetrics& m) {
    out << (m.tpr_defined ? format_double(m.tpr) : "nan") << ','
        << format_double(m.fdp) << ',' << format_double(m.f1);
}

}  // namespace

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
    std::ofstream out = open_out(path);
    out << "scenario,method,o,K,replicate,failed,tpr,fdp,f1,"
           "tpr_o,fdp_o,f1_o,tpr_oc,fdp_oc,f1_oc\n";
    for (const SweepRow& row : sweep.rows) {
        out << row.scenario << ',' << row.method << ',' << row.o << ',' << row.K << ','
            << row.replicate << ',' << (row.failed ? 1 : 0) << ',';
        write_metric_fields(out, row.all);
        out << ',';
        write_metric_fields(out, row.in_o);
        out << ',';
        write_metric_fields(out, row.in_oc);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_sweep_summary_csv(const std::string& path, const SweepResult& sweep) {
    std::ofstream out = open_out(path);
    out << "scenario,method,n_used,n_failed,sd_defined,mean_tpr,sd_tpr,"
           "mean_fdp,sd_fdp,mean_f1,sd_f1\n";
    for (const SweepCell& c : sweep.cells) {
        out << c.scenario << ',' << c.method << ',' << c.n_used << ',' << c.n_failed
            << ',' << (c.sd_defined ? 1 : 0) << ',' << format_double(c.mean_tpr) << ','
            << format_double(c.sd_tpr) << ',' << format_double(c.mean_fdp) << ','
            << format_double(c.sd_fdp) << ',' << format_double(c.mean_f1) << ','
            << format_double(c.sd_f1) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for hashing: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_hash, std::uint64_t seed,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["version"] = "0.1.0";
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["outputs"] = outputs;
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void require_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError(where + ": unknown key '" + key + "'");
    }
}

}  // namespace quilt::io
