#pragma once

#include <stdexcept>
#include <string>

namespace binsight {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public Error { public: using Error::Error; };
class EmptyFileError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

class GeometryMismatchError : public Error { public: using Error::Error; };
class ShapeMismatchError : public Error { public: using Error::Error; };
class HeadCountMismatchError : public Error { public: using Error::Error; };
class NoConvLayerError : public Error { public: using Error::Error; };
class DivergenceError : public Error { public: using Error::Error; };

class SingleClassError : public Error { public: using Error::Error; };
class DimensionMismatchError : public Error { public: using Error::Error; };

class TooFewSamplesError : public Error { public: using Error::Error; };

// Manifest parse failures carry the 1-based line number of the bad row.
class ManifestError : public Error {
public:
    ManifestError(const std::string& msg, std::size_t line)
        : Error(msg), line_(line) {}
    std::size_t line() const { return line_; }
private:
    std::size_t line_;
};

// Model file problems: bad container, unknown format_version, wrong channels.
class FormatError : public Error { public: using Error::Error; };

} // namespace binsight
