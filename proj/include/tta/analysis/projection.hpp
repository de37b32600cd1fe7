#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tta/error.hpp"
#include "tta/util/format.hpp"

namespace tta {

enum class ProjectionMethod { pca, external };

struct Point2d {
  std::string point_id;
  double x = 0.0;
  double y = 0.0;
};

/// Principal-component projection of the rows of `points` onto the top two axes.
/// Each axis is signed so its largest-magnitude loading is positive.
inline Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& points) {
  if (points.rows() < 3) throw Error(ErrorKind::TooFewPoints, "projection needs at least 3 points");
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index d = points.cols();
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  return centered * axes;
}

inline std::vector<Point2d> project_2d(const std::vector<std::string>& ids, const Eigen::MatrixXd& points) {
  if (static_cast<Eigen::Index>(ids.size()) != points.rows())
    throw Error(ErrorKind::LengthMismatch, "point ids and rows differ in count");
  const Eigen::MatrixXd xy = pca_2d(points);
  std::vector<Point2d> out;
  for (Eigen::Index i = 0; i < xy.rows(); ++i) out.push_back({ids[static_cast<std::size_t>(i)], xy(i, 0), xy(i, 1)});
  return out;
}

/// Matrix handed to an external embedding tool: header point_id,d0..dD-1.
inline void write_projection_input(const std::filesystem::path& path, const std::vector<std::string>& ids,
                                   const Eigen::MatrixXd& points) {
  if (points.rows() < 3) throw Error(ErrorKind::TooFewPoints, "projection needs at least 3 points");
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::UnreadableFile, "cannot write " + path.string());
  std::vector<std::string> header{"point_id"};
  for (Eigen::Index j = 0; j < points.cols(); ++j) header.push_back("d" + std::to_string(j));
  out << csv_row(header);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::vector<std::string> row{ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < points.cols(); ++j) row.push_back(format_double(points(i, j)));
    out << csv_row(row);
  }
}

/// 2-D output of the external tool: header point_id,x,y.
inline std::vector<Point2d> read_projection_output(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::CorruptFile, path.string() + ": empty projection file");
  const auto header = csv_split(line);
  if (header.size() != 3 || header[0] != "point_id" || header[1] != "x" || header[2] != "y")
    throw Error(ErrorKind::CorruptFile, path.string() + ": expected header point_id,x,y");
  std::vector<Point2d> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = csv_split(line);
    if (cells.size() != 3) throw Error(ErrorKind::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    try {
      out.push_back({cells[0], std::stod(cells[1]), std::stod(cells[2])});
    } catch (const std::exception&) {
      throw Error(ErrorKind::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  if (out.size() < 3) throw Error(ErrorKind::TooFewPoints, "projection output has fewer than 3 points");
  return out;
}

}  // namespace tta
