#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mohsm/serialize.hpp"
#include "mohsm/types.hpp"

namespace mohsm {

enum class CsvSchema { kLong, kWide };

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace and CR
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_double(const std::string& s, const std::string& path, int line_no) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_no) + ": malformed number '" + s + "'");
    }
}

}  // namespace detail

/// Loads a UTF-8 comma-separated file with a header row. Long form has
/// columns (channel, x, y); wide form has (x, ch1, ch2, ...) with empty
/// cells meaning missing observations. Row order is preserved.
inline Dataset load_csv(const std::string& path, CsvSchema schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const auto header = detail::split_csv_line(line);

    Dataset data;
    int line_no = 1;
    if (schema == CsvSchema::kLong) {
        if (header.size() != 3)
            throw IoError(path + ":1: long form needs exactly 3 columns (channel,x,y)");
        std::map<std::string, int> channel_ids;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            const auto cells = detail::split_csv_line(line);
            if (cells.size() != 3)
                throw IoError(path + ":" + std::to_string(line_no) + ": expected 3 cells, got " +
                              std::to_string(cells.size()));
            auto it = channel_ids.find(cells[0]);
            if (it == channel_ids.end()) {
                it = channel_ids.emplace(cells[0], data.n_channels()).first;
                data.channel_names.push_back(cells[0]);
            }
            DataPoint p;
            p.channel = it->second;
            p.x = VectorXd::Constant(1, detail::parse_double(cells[1], path, line_no));
            p.y = detail::parse_double(cells[2], path, line_no);
            data.points.push_back(std::move(p));
        }
    } else {
        if (header.size() < 2)
            throw IoError(path + ":1: wide form needs an x column plus channel columns");
        data.channel_names.assign(header.begin() + 1, header.end());
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            const auto cells = detail::split_csv_line(line);
            if (cells.size() != header.size())
                throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " +
                              std::to_string(cells.size()));
            const double x = detail::parse_double(cells[0], path, line_no);
            for (size_t c = 1; c < cells.size(); ++c) {
                if (cells[c].empty()) continue;
                DataPoint p;
                p.channel = static_cast<int>(c - 1);
                p.x = VectorXd::Constant(1, x);
                p.y = detail::parse_double(cells[c], path, line_no);
                data.points.push_back(std::move(p));
            }
        }
    }
    data.validate();
    return data;
}

/// Writes the dataset in long form (channel,x,y).
inline void save_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "channel,x,y\n";
    out.precision(17);
    for (const auto& p : data.points) {
        require(p.x.size() == 1, "long-form CSV export is 1-D");
        out << data.channel_names[p.channel] << "," << p.x[0] << "," << p.y << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

/// Closed interval [lo, hi] of inputs held out for one channel.
struct MaskRange {
    int channel = 0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Splits points into (train_pool, heldout): a point goes to heldout iff it
/// falls inside a mask for its channel. The two parts partition the data.
inline std::pair<Dataset, Dataset> apply_masks(const Dataset& data,
                                               const std::vector<MaskRange>& masks) {
    for (const auto& m : masks) {
        require(m.channel >= 0 && m.channel < data.n_channels(), "mask channel out of range");
        require(m.lo <= m.hi, "mask range must satisfy lo <= hi");
    }
    Dataset train_pool, heldout;
    train_pool.channel_names = heldout.channel_names = data.channel_names;
    for (const auto& p : data.points) {
        bool masked = false;
        for (const auto& m : masks) {
            if (m.channel == p.channel && p.x[0] >= m.lo && p.x[0] <= m.hi) {
                masked = true;
                break;
            }
        }
        (masked ? heldout : train_pool).points.push_back(p);
    }
    return {std::move(train_pool), std::move(heldout)};
}

/// Experiment configuration as a single JSON document.
struct ExperimentConfig {
    std::string data_path;
    std::string data_schema = "long";  // "long" or "wide"
    std::string method = "mohsm";      // mosm | hsm | hsm-lmc | mohsm
    int P = 1;                         // windows
    int Q = 1;                         // mixtures per window
    std::string optimizer = "adam";
    int max_iters = 500;
    double learning_rate = 0.02;
    double grad_tol = 1e-5;
    std::vector<MaskRange> masks;      // channel indices into the loaded data
    double train_fraction = 1.0;
    std::uint64_t seed = 0;
    std::string out_dir = ".";

    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        try {
            c.data_path = j.value("data", c.data_path);
            c.data_schema = j.value("schema", c.data_schema);
            c.method = j.value("method", c.method);
            c.P = j.value("P", c.P);
            c.Q = j.value("Q", c.Q);
            c.optimizer = j.value("optimizer", c.optimizer);
            c.max_iters = j.value("max_iters", c.max_iters);
            c.learning_rate = j.value("learning_rate", c.learning_rate);
            c.grad_tol = j.value("grad_tol", c.grad_tol);
            c.train_fraction = j.value("train_fraction", c.train_fraction);
            c.seed = j.value("seed", c.seed);
            c.out_dir = j.value("out", c.out_dir);
            if (j.contains("masks")) {
                for (const auto& jm : j.at("masks")) {
                    MaskRange m;
                    m.channel = jm.at("channel").get<int>();
                    m.lo = jm.at("lo").get<double>();
                    m.hi = jm.at("hi").get<double>();
                    c.masks.push_back(m);
                }
            }
        } catch (const json::exception& e) {
            throw ConfigError(std::string("invalid experiment config: ") + e.what());
        }
        c.validate();
        return c;
    }

    void validate() const {
        if (method != "mosm" && method != "hsm" && method != "hsm-lmc" && method != "mohsm")
            throw ConfigError("field 'method' must be one of mosm, hsm, hsm-lmc, mohsm");
        if (P < 1) throw ConfigError("field 'P' must be >= 1");
        if (Q < 1) throw ConfigError("field 'Q' must be >= 1");
        if (max_iters < 0) throw ConfigError("field 'max_iters' must be >= 0");
        if (!(learning_rate > 0.0)) throw ConfigError("field 'learning_rate' must be > 0");
        if (!(train_fraction > 0.0 && train_fraction <= 1.0))
            throw ConfigError("field 'train_fraction' must be in (0, 1]");
        for (const auto& m : masks)
            if (m.lo > m.hi) throw ConfigError("field 'masks': range must satisfy lo <= hi");
        if (data_schema != "long" && data_schema != "wide")
            throw ConfigError("field 'schema' must be 'long' or 'wide'");
    }
};

}  // namespace mohsm
