#include "gmmtree/data.hpp"

#include "gmmtree/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace gmmtree {

namespace {

// Reads one RFC-4180 record. Returns false at end of input.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    if (!any) {
        return false;
    }
    fields.push_back(std::move(field));
    return true;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

void write_number(std::ostream& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.write(buf, res.ptr - buf);
}

void write_field(std::ostream& out, const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        out << s;
        return;
    }
    out << '"';
    for (char c : s) {
        if (c == '"') {
            out << '"';
        }
        out << c;
    }
    out << '"';
}

}  // namespace

Dataset parse_csv(std::istream& in, const CsvOptions& opts) {
    std::vector<std::string> fields;
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<char>> missing;
    std::size_t width = 0;
    bool first = true;
    while (read_record(in, opts.delimiter, fields)) {
        if (fields.size() == 1 && fields[0].empty()) {
            continue;  // blank line
        }
        if (first && opts.header) {
            names = fields;
            width = fields.size();
            first = false;
            continue;
        }
        if (width == 0) {
            width = fields.size();
        }
        const std::size_t row = rows.size();
        if (fields.size() != width) {
            throw RaggedRows("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(width));
        }
        first = false;
        std::vector<double> values(width, 0.0);
        std::vector<char> miss(width, 0);
        for (std::size_t c = 0; c < width; ++c) {
            const std::string& tok = fields[c];
            if (std::find(opts.missing_markers.begin(), opts.missing_markers.end(), tok) !=
                opts.missing_markers.end()) {
                miss[c] = 1;
                continue;
            }
            const std::string_view t = trim(tok);
            double v = 0.0;
            const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
                throw ParseError(row, c, tok);
            }
            values[c] = v;
        }
        rows.push_back(std::move(values));
        missing.push_back(std::move(miss));
    }

    Dataset ds(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < width; ++c) {
            if (missing[i][c]) {
                ds.set_missing(i, c);
            } else {
                ds.set(i, c, rows[i][c]);
            }
        }
    }
    ds.column_names = std::move(names);
    return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return parse_csv(in, opts);
}

void write_csv(std::ostream& out, const Dataset& ds, bool header) {
    if (header && !ds.column_names.empty()) {
        for (std::size_t c = 0; c < ds.column_names.size(); ++c) {
            if (c > 0) {
                out << ',';
            }
            write_field(out, ds.column_names[c]);
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            if (c > 0) {
                out << ',';
            }
            if (ds.missing(i, c)) {
                out << "NA";
            } else {
                write_number(out, ds.value(i, c));
            }
        }
        out << '\n';
    }
}

void save_csv(const std::string& path, const Dataset& ds, bool header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    write_csv(out, ds, header);
}

void write_mask_csv(std::ostream& out, const Dataset& ds) {
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            if (c > 0) {
                out << ',';
            }
            out << (ds.missing(i, c) ? '1' : '0');
        }
        out << '\n';
    }
}

}  // namespace gmmtree
