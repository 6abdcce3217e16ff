#include "caslab/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace caslab {

ConfigError::ConfigError(const std::string& what, int line, int column, const std::string& source)
    : Error((source.empty() ? std::string() : source + ":") + std::to_string(line) + ":" + std::to_string(column) +
            ": " + what),
      line(line),
      column(column) {}

namespace {

class Parser {
public:
    Parser(std::string_view text, std::string source) : s_(text), source_(std::move(source)) {}

    json parse() {
        json root = json::object();
        json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                table = &header(root);
            } else {
                pair(*table);
            }
            end_of_line();
        }
        return root;
    }

private:
    std::string_view s_;
    std::string source_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    std::set<std::string> tables_;

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, line_, col_, source_); }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }
    char get() {
        char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }
    void ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
    }
    void comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') get();
    }
    void skip_blank_lines() {
        while (true) {
            ws();
            comment();
            if (!eof() && peek() == '\n') {
                get();
                continue;
            }
            return;
        }
    }
    // whitespace, comments and newlines inside arrays
    void ws_multiline() {
        while (true) {
            ws();
            comment();
            if (!eof() && peek() == '\n') {
                get();
                continue;
            }
            return;
        }
    }
    void end_of_line() {
        ws();
        comment();
        if (eof()) return;
        if (peek() != '\n') fail(std::string("unexpected '") + peek() + "' after value");
        get();
    }

    static bool key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

    std::string key() {
        std::string k;
        while (!eof() && key_char(peek())) k += get();
        if (k.empty()) fail(eof() ? "expected a key" : std::string("expected a key, found '") + peek() + "'");
        return k;
    }

    json& header(json& root) {
        get();
        ws();
        json* t = &root;
        std::string path;
        while (true) {
            std::string k = key();
            path += (path.empty() ? "" : ".") + k;
            if (t->contains(k) && !(*t)[k].is_object()) fail("'" + path + "' is already a value");
            t = &(*t)[k];
            if (t->is_null()) *t = json::object();
            ws();
            if (peek() == '.') {
                get();
                ws();
                continue;
            }
            if (peek() != ']') fail("expected ']' to close the table header");
            get();
            break;
        }
        if (!tables_.insert(path).second) fail("table [" + path + "] is defined twice");
        return *t;
    }

    void pair(json& table) {
        int l = line_, c = col_;
        std::string k = key();
        ws();
        if (peek() != '=') fail("expected '=' after key '" + k + "'");
        get();
        ws();
        if (eof() || peek() == '\n' || peek() == '#') fail("missing value for key '" + k + "'");
        json v = value();
        if (table.contains(k)) throw ConfigError("key '" + k + "' is defined twice", l, c, source_);
        table[k] = std::move(v);
    }

    json value() {
        char c = peek();
        if (c == '"') return string();
        if (c == '[') return array();
        if (c == 't' || c == 'f') return boolean();
        if (c == '+' || c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return number();
        fail(std::string("unexpected '") + c + "' where a value was expected");
    }

    json string() {
        get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("unterminated string");
                char e = get();
                switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(std::string("unknown escape '\\") + e + "'");
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    json boolean() {
        std::string w;
        while (!eof() && std::isalpha(static_cast<unsigned char>(peek()))) w += get();
        if (w == "true") return true;
        if (w == "false") return false;
        fail("unknown bare word '" + w + "'");
    }

    json number() {
        std::size_t start = pos_;
        int l = line_, c = col_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                          peek() == '-' || peek() == '_'))
            get();
        std::string tok(s_.substr(start, pos_ - start));
        std::string body = tok[0] == '+' ? tok.substr(1) : tok;
        bool integral = body.find_first_of(".eE") == std::string::npos;
        if (integral) {
            long long v = 0;
            auto r = std::from_chars(body.data(), body.data() + body.size(), v);
            if (r.ec == std::errc() && r.ptr == body.data() + body.size()) return v;
        } else {
            double v = 0;
            auto r = std::from_chars(body.data(), body.data() + body.size(), v);
            if (r.ec == std::errc() && r.ptr == body.data() + body.size()) return v;
        }
        throw ConfigError("malformed number '" + tok + "'", l, c, source_);
    }

    json array() {
        get();
        json a = json::array();
        ws_multiline();
        if (peek() == ']') {
            get();
            return a;
        }
        while (true) {
            ws_multiline();
            if (peek() == ']') {
                get();
                return a;
            }
            if (eof()) fail("unterminated array");
            a.push_back(value());
            ws_multiline();
            if (peek() == ',') {
                get();
                continue;
            }
            if (peek() == ']') {
                get();
                return a;
            }
            fail(eof() ? "unterminated array" : std::string("expected ',' or ']' in array, found '") + peek() + "'");
        }
    }
};

} // namespace

json parse_config(std::string_view text, const std::string& source) { return Parser(text, source).parse(); }

json load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file", 0, 0, path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

} // namespace caslab
