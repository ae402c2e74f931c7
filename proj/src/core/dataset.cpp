#include "dataset.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "error.hpp"

namespace aqsgee {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_number(std::string_view text, double& value) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

LongitudinalDataset::LongitudinalDataset(std::vector<Mat> covariates, std::vector<Vec> responses)
    : x_(std::move(covariates)), y_(std::move(responses)) {
  if (x_.empty()) throw InvalidArgument("dataset needs at least one individual");
  if (x_.size() != y_.size()) throw InvalidArgument("covariate and response counts differ");
  m_ = static_cast<std::size_t>(x_.front().rows());
  p_ = static_cast<std::size_t>(x_.front().cols());
  if (m_ == 0 || p_ == 0) throw InvalidArgument("dataset needs m >= 1 and p >= 1");
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (static_cast<std::size_t>(x_[i].rows()) != m_ || static_cast<std::size_t>(x_[i].cols()) != p_)
      throw InvalidArgument("individual " + std::to_string(i) + " has a covariate matrix of the wrong shape");
    if (static_cast<std::size_t>(y_[i].size()) != m_)
      throw InvalidArgument("individual " + std::to_string(i) + " has a response of the wrong length");
  }
}

void LongitudinalDataset::check_index(std::size_t i) const {
  if (i >= n())
    throw InvalidArgument("individual index " + std::to_string(i) + " out of range (n = " +
                          std::to_string(n()) + ")");
}

LongitudinalDataset LongitudinalDataset::prefix(std::size_t count) const {
  if (count == 0 || count > n()) throw InvalidArgument("prefix length out of range");
  return LongitudinalDataset(std::vector<Mat>(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(count)),
                             std::vector<Vec>(y_.begin(), y_.begin() + static_cast<std::ptrdiff_t>(count)));
}

LongitudinalDataset LongitudinalDataset::with_response(std::size_t i, const Vec& y) const {
  check_index(i);
  auto responses = y_;
  responses[i] = y;
  return LongitudinalDataset(x_, std::move(responses));
}

LongitudinalDataset LongitudinalDataset::with_scaled_columns(const Vec& scale) const {
  if (static_cast<std::size_t>(scale.size()) != p_) throw InvalidArgument("scale vector must have length p");
  auto covariates = x_;
  for (auto& x : covariates) x = x * scale.asDiagonal();
  return LongitudinalDataset(std::move(covariates), y_);
}

LongitudinalDataset read_dataset_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> LoadError {
    return LoadError(source + ":" + std::to_string(line_no) + ": " + msg);
  };

  if (!std::getline(in, line)) {
    line_no = 1;
    throw fail("empty file, expected header subject,time,y,x1,...");
  }
  ++line_no;
  const auto header = split_fields(line);
  if (header.size() < 4 || header[0] != "subject" || header[1] != "time" || header[2] != "y")
    throw fail("header must be subject,time,y,x1,...,xp");
  const std::size_t p = header.size() - 3;

  std::vector<Mat> covariates;
  std::vector<Vec> responses;
  std::vector<std::vector<double>> block_x;
  std::vector<double> block_y;
  std::string current_subject;
  std::vector<std::string> seen_subjects;
  double last_time = 0.0;
  std::size_t m = 0;
  std::size_t block_start_line = 0;

  auto close_block = [&]() {
    if (block_y.empty()) return;
    if (m == 0) m = block_y.size();
    if (block_y.size() != m) {
      line_no = block_start_line;
      throw fail("subject '" + current_subject + "' has " + std::to_string(block_y.size()) +
                 " rows, expected " + std::to_string(m));
    }
    Mat x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
    Vec y(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      y(static_cast<Eigen::Index>(j)) = block_y[j];
      for (std::size_t k = 0; k < p; ++k)
        x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = block_x[j][k];
    }
    covariates.push_back(std::move(x));
    responses.push_back(std::move(y));
    block_x.clear();
    block_y.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != p + 3)
      throw fail("expected " + std::to_string(p + 3) + " fields, found " + std::to_string(fields.size()));
    const std::string subject(fields[0]);
    if (subject.empty()) throw fail("empty subject id");
    double time = 0.0;
    if (!parse_number(fields[1], time)) throw fail("time '" + std::string(fields[1]) + "' is not a number");
    double yv = 0.0;
    if (!parse_number(fields[2], yv)) throw fail("y '" + std::string(fields[2]) + "' is not a number");
    std::vector<double> xs(p);
    for (std::size_t k = 0; k < p; ++k)
      if (!parse_number(fields[3 + k], xs[k]))
        throw fail("x" + std::to_string(k + 1) + " '" + std::string(fields[3 + k]) + "' is not a number");

    if (block_y.empty() || subject != current_subject) {
      const std::size_t here = line_no;
      close_block();
      line_no = here;
      for (const auto& s : seen_subjects)
        if (s == subject) throw fail("subject '" + subject + "' reappears; rows must be sorted by subject");
      seen_subjects.push_back(subject);
      current_subject = subject;
      block_start_line = line_no;
    } else if (!(time > last_time)) {
      throw fail("time values for subject '" + subject + "' are not strictly increasing");
    }
    last_time = time;
    block_y.push_back(yv);
    block_x.push_back(std::move(xs));
  }
  ++line_no;
  close_block();
  if (covariates.empty()) throw fail("no data rows");
  return LongitudinalDataset(std::move(covariates), std::move(responses));
}

LongitudinalDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in, path);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void write_dataset_csv(const LongitudinalDataset& data, std::ostream& out) {
  out << "subject,time,y";
  for (std::size_t k = 0; k < data.p(); ++k) out << ",x" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Mat& x = data.X(i);
    const Vec& y = data.y(i);
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      out << (i + 1) << ',' << (j + 1) << ',' << format_double(y(j));
      for (Eigen::Index k = 0; k < x.cols(); ++k) out << ',' << format_double(x(j, k));
      out << '\n';
    }
  }
}

Mat load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open matrix '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    for (auto field : split_fields(line)) {
      double v = 0.0;
      if (!parse_number(field, v))
        throw LoadError(path + ":" + std::to_string(line_no) + ": '" + std::string(field) + "' is not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError(path + ": empty matrix");
  const std::size_t m = rows.size();
  Mat out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r) {
    if (rows[r].size() != m) throw LoadError(path + ": matrix must be square");
    for (std::size_t c = 0; c < m; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return out;
}

}  // namespace aqsgee
