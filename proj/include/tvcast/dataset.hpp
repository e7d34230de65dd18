#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tvcast/common.hpp"
#include "tvcast/csv.hpp"

namespace tvcast {

struct Observation {
    int t = 0;     // time index, 1-based
    long id = 0;   // row identifier, carried through to prediction outputs
    double y = 0.0;
    Eigen::VectorXd x;
};

// Immutable after validation; shared read-only across chain workers.
struct Dataset {
    std::vector<Observation> observations;
    int T = 0;  // max time index; gaps (n_t = 0) are allowed
    int P = 0;  // predictor count, including any intercept column
    bool has_intercept = false;  // column 0 is constant 1
    bool binary = false;         // every y is 0 or 1

    std::size_t size() const { return observations.size(); }
};

struct RawRecord {
    int t = 0;
    long id = 0;
    double y = 0.0;
    std::vector<double> x;
};

// Checks every invariant and assembles the Dataset. With add_intercept a
// constant-1 column is prepended and P grows by one.
inline Dataset validate_dataset(const std::vector<RawRecord>& records, bool binary_mode,
                                bool add_intercept) {
    require(!records.empty(), "dataset is empty");
    const std::size_t p_raw = records.front().x.size();
    Dataset ds;
    ds.binary = binary_mode;
    ds.P = static_cast<int>(p_raw) + (add_intercept ? 1 : 0);
    require(ds.P >= 1, "dataset has no predictors");
    ds.observations.reserve(records.size());
    for (const RawRecord& r : records) {
        require(r.t >= 1, "time index must be >= 1, got " + std::to_string(r.t));
        require(r.x.size() == p_raw,
                "ragged predictor row at t=" + std::to_string(r.t) + ", id=" + std::to_string(r.id) +
                    ": expected " + std::to_string(p_raw) + " values, got " +
                    std::to_string(r.x.size()));
        require(std::isfinite(r.y), "non-finite outcome at id=" + std::to_string(r.id));
        if (binary_mode)
            require(r.y == 0.0 || r.y == 1.0,
                    "binary mode requires y in {0,1}, got " + std::to_string(r.y) +
                        " at id=" + std::to_string(r.id));
        Observation obs;
        obs.t = r.t;
        obs.id = r.id;
        obs.y = r.y;
        obs.x.resize(ds.P);
        int j = 0;
        if (add_intercept) obs.x[j++] = 1.0;
        for (double v : r.x) {
            require(std::isfinite(v), "non-finite predictor at id=" + std::to_string(r.id));
            obs.x[j++] = v;
        }
        ds.T = std::max(ds.T, obs.t);
        ds.observations.push_back(std::move(obs));
    }
    ds.has_intercept = true;
    for (const Observation& obs : ds.observations)
        if (obs.x[0] != 1.0) {
            ds.has_intercept = false;
            break;
        }
    return ds;
}

// train: all observations with t <= t_train (T reset to t_train);
// test: the remainder with original time indices.
inline std::pair<Dataset, Dataset> split_by_time(const Dataset& ds, int t_train) {
    require(t_train >= 1 && t_train < ds.T,
            "t_train must satisfy 1 <= t_train < T=" + std::to_string(ds.T) + ", got " +
                std::to_string(t_train));
    Dataset train = ds;
    Dataset test = ds;
    train.observations.clear();
    test.observations.clear();
    for (const Observation& obs : ds.observations)
        (obs.t <= t_train ? train : test).observations.push_back(obs);
    require(!train.observations.empty(), "train split is empty");
    require(!test.observations.empty(), "test split is empty");
    train.T = t_train;
    return {std::move(train), std::move(test)};
}

// Observation CSV schema: t,id,y,x1,...,xP
inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> header = {"t", "id", "y"};
    for (int p = 1; p <= ds.P; ++p) header.push_back("x" + std::to_string(p));
    w.row(header);
    std::vector<std::string> row;
    for (const Observation& obs : ds.observations) {
        row.clear();
        row.push_back(std::to_string(obs.t));
        row.push_back(std::to_string(obs.id));
        row.push_back(format_double(obs.y));
        for (int p = 0; p < ds.P; ++p) row.push_back(format_double(obs.x[p]));
        w.row(row);
    }
}

inline Dataset read_dataset_csv(const std::string& path, bool binary_mode, bool add_intercept) {
    const csv::Table table = csv::read_table(path);
    require(table.header.size() >= 4, "dataset CSV needs header t,id,y,x1,... in " + path);
    require(table.header[0] == "t" && table.header[1] == "id" && table.header[2] == "y",
            "dataset CSV header must start with t,id,y in " + path);
    for (std::size_t j = 3; j < table.header.size(); ++j)
        require(table.header[j] == "x" + std::to_string(j - 2),
                "dataset CSV predictor columns must be x1,...,xP in " + path);
    std::vector<RawRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path + " row " + std::to_string(i + 2);
        require(row.size() == table.header.size(), "wrong field count in " + ctx);
        RawRecord r;
        r.t = static_cast<int>(csv::parse_long(row[0], ctx));
        r.id = csv::parse_long(row[1], ctx);
        r.y = csv::parse_double(row[2], ctx);
        for (std::size_t j = 3; j < row.size(); ++j) r.x.push_back(csv::parse_double(row[j], ctx));
        records.push_back(std::move(r));
    }
    return validate_dataset(records, binary_mode, add_intercept);
}

}  // namespace tvcast
