#include "gmmtree/model_io.hpp"

#include "gmmtree/errors.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gmmtree {

std::string format_real(double v) {
    if (std::isnan(v)) {
        return "null";
    }
    if (std::isinf(v)) {
        return v > 0 ? "1e999" : "-1e999";
    }
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

void write_vector(std::ostringstream& out, const Vector& v) {
    out << '[';
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        out << (k ? ", " : "") << format_real(v[k]);
    }
    out << ']';
}

void write_lower(std::ostringstream& out, const SymMatrix& m) {
    out << '[';
    bool first = true;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c <= r; ++c) {
            out << (first ? "" : ", ") << format_real(m(r, c));
            first = false;
        }
    }
    out << ']';
}

}  // namespace

std::string model_to_json(const MixtureModel& model, const TrainTrace* trace) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"d\": " << model.d << ",\n";
    out << "  \"L\": " << model.size() << ",\n";
    out << "  \"weights\": [";
    const std::vector<double> w = model.weights();
    for (std::size_t j = 0; j < w.size(); ++j) {
        out << (j ? ", " : "") << format_real(w[j]);
    }
    out << "],\n  \"means\": [";
    for (std::size_t j = 0; j < model.size(); ++j) {
        out << (j ? ",\n    " : "\n    ");
        write_vector(out, model.components[j].mean);
    }
    out << "\n  ],\n  \"covariances\": [";
    for (std::size_t j = 0; j < model.size(); ++j) {
        out << (j ? ",\n    " : "\n    ");
        write_lower(out, model.components[j].cov);
    }
    out << "\n  ],\n";
    out << "  \"config\": " << to_json(model.config).dump() << ",\n";
    out << "  \"trace\": ";
    if (trace) {
        out << "{\"initial_log_likelihood\": " << format_real(trace->initial_log_likelihood)
            << ", \"log_likelihood\": [";
        for (std::size_t k = 0; k < trace->iterations.size(); ++k) {
            out << (k ? ", " : "") << format_real(trace->iterations[k].log_likelihood);
        }
        out << "], \"iterations\": " << trace->iterations.size() << ", \"stop_reason\": \""
            << trace->stop_reason << "\"}";
    } else {
        out << "null";
    }
    out << "\n}\n";
    return out.str();
}

void save_model(const std::string& path, const MixtureModel& model, const TrainTrace* trace) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << model_to_json(model, trace);
}

namespace {

Vector read_vector(const nlohmann::json& j, std::size_t expected, const char* what) {
    if (!j.is_array() || j.size() != expected) {
        throw FormatError(std::string(what) + " must be an array of " + std::to_string(expected) + " numbers");
    }
    Vector v(static_cast<Eigen::Index>(expected));
    for (std::size_t k = 0; k < expected; ++k) {
        if (!j[k].is_number()) {
            throw FormatError(std::string(what) + " holds a non-number");
        }
        v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    }
    return v;
}

}  // namespace

MixtureModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("model is not valid JSON: ") + e.what());
    }
    try {
        MixtureModel model;
        model.d = j.at("d").get<std::size_t>();
        const auto L = j.at("L").get<std::size_t>();
        if (model.d == 0 || L == 0) {
            throw FormatError("model needs d >= 1 and L >= 1");
        }
        if (j.contains("config") && !j.at("config").is_null()) {
            model.config = config_from_json(j.at("config"));
        }
        const Vector weights = read_vector(j.at("weights"), L, "weights");
        const auto& means = j.at("means");
        const auto& covs = j.at("covariances");
        if (!means.is_array() || means.size() != L || !covs.is_array() || covs.size() != L) {
            throw FormatError("means and covariances must list L entries");
        }
        const auto d = static_cast<Eigen::Index>(model.d);
        const std::size_t tri = model.d * (model.d + 1) / 2;
        for (std::size_t c = 0; c < L; ++c) {
            GaussianComponent comp;
            comp.mean = read_vector(means[c], model.d, "mean");
            const Vector lower = read_vector(covs[c], tri, "covariance");
            comp.cov.resize(d, d);
            Eigen::Index k = 0;
            for (Eigen::Index r = 0; r < d; ++r) {
                for (Eigen::Index col = 0; col <= r; ++col) {
                    comp.cov(r, col) = comp.cov(col, r) = lower[k++];
                }
            }
            if (!(weights[static_cast<Eigen::Index>(c)] > 0.0)) {
                throw FormatError("weights must be positive");
            }
            comp.log_weight = std::log(weights[static_cast<Eigen::Index>(c)]);
            model.components.push_back(std::move(comp));
        }
        model.refresh();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model: ") + e.what());
    } catch (const NotPositiveDefinite& e) {
        throw FormatError(std::string("model covariance is not positive definite: ") + e.what());
    }
}

MixtureModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("cannot read " + path);
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace gmmtree
