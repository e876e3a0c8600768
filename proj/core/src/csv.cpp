#include "c2f/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace c2f::csv {

namespace {

bool needs_quotes(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string escape(const std::string& s) {
    if (!needs_quotes(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string format_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape(fields[i]);
    }
    out += '\n';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::vector<std::string>> parse(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(row);
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            // swallow; \r\n handled by the \n branch
        } else {
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw std::runtime_error("CSV ends inside a quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open file for writing: " + path);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw std::runtime_error("failed writing file: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace c2f::csv
