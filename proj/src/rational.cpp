#include "mfe/rational.hpp"

#include <charconv>
#include <limits>

namespace mfe {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

bool fits64(__int128 v) {
    return v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max();
}

std::int64_t parse_int(std::string_view s, std::string_view whole) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc::result_out_of_range) throw OverflowError("Rational: value out of range: " + std::string(whole));
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ParseError("invalid rational '" + std::string(whole) + "'");
    return v;
}

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::domain_error("Rational: zero denominator");
    *this = from_wide(n, d);
}

Rational Rational::from_wide(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("Rational: zero denominator");
    if (d < 0) {
        n = -n;
        d = -d;
    }
    __int128 g = gcd128(n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    if (!fits64(n) || !fits64(d)) throw OverflowError("Rational: result exceeds 64-bit range");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
}

std::int64_t Rational::floor() const {
    std::int64_t q = num_ / den_;
    if ((num_ % den_ != 0) && (num_ < 0)) --q;
    return q;
}

Rational operator+(const Rational& a, const Rational& b) {
    if (a.den_ == b.den_) return Rational::from_wide(static_cast<__int128>(a.num_) + b.num_, a.den_);
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                               static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("Rational: division by zero");
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

Rational Rational::operator-() const {
    if (num_ == std::numeric_limits<std::int64_t>::min()) throw OverflowError("Rational: negation overflow");
    Rational r = *this;
    r.num_ = -num_;
    return r;
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 l = static_cast<__int128>(a.num_) * b.den_;
    __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l <=> r;
}

Rational Rational::parse(std::string_view text) {
    std::string_view s = text;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) throw ParseError("empty rational");

    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        return Rational(parse_int(s.substr(0, slash), text), parse_int(s.substr(slash + 1), text));
    }

    bool negative = false;
    std::string_view body = s;
    if (body.front() == '-' || body.front() == '+') {
        negative = body.front() == '-';
        body.remove_prefix(1);
    }
    auto dot = body.find('.');
    std::string_view int_part = dot == std::string_view::npos ? body : body.substr(0, dot);
    std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : body.substr(dot + 1);
    if (int_part.empty() && frac_part.empty()) throw ParseError("invalid rational '" + std::string(text) + "'");
    if (frac_part.size() > 18) throw ParseError("too many decimal places in '" + std::string(text) + "'");

    __int128 n = int_part.empty() ? 0 : parse_int(int_part, text);
    __int128 d = 1;
    for (char c : frac_part) {
        if (c < '0' || c > '9') throw ParseError("invalid rational '" + std::string(text) + "'");
        n = n * 10 + (c - '0');
        d *= 10;
        if (!fits64(n)) throw OverflowError("Rational: value out of range: " + std::string(text));
    }
    return from_wide(negative ? -n : n, d);
}

std::string Rational::to_string() const {
    std::int64_t d = den_;
    int twos = 0, fives = 0;
    while (d % 2 == 0) {
        d /= 2;
        ++twos;
    }
    while (d % 5 == 0) {
        d /= 5;
        ++fives;
    }
    int digits = twos > fives ? twos : fives;
    if (d != 1 || digits > 18) return std::to_string(num_) + "/" + std::to_string(den_);
    if (den_ == 1) return std::to_string(num_);

    __int128 scaled = num_;
    __int128 scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    scaled = scaled * (scale / den_);
    bool negative = scaled < 0;
    if (negative) scaled = -scaled;
    __int128 ip = scaled / scale;
    __int128 fp = scaled % scale;

    auto to_str = [](__int128 v) {
        if (v == 0) return std::string("0");
        std::string s;
        while (v > 0) {
            s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
            v /= 10;
        }
        return s;
    };
    std::string frac = to_str(fp);
    frac.insert(frac.begin(), static_cast<std::size_t>(digits) - frac.size(), '0');
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    return (negative ? "-" : "") + to_str(ip) + "." + frac;
}

}  // namespace mfe
