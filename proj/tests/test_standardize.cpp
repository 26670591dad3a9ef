#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "iht/standardize.hpp"
#include "test_support.hpp"

using namespace iht;

namespace {

Dataset parse(const std::string& text, const std::string& response, char delim = ',') {
  std::istringstream in(text);
  return parse_dataset(in, response, delim);
}

std::string error_of(const std::string& text, const std::string& response) {
  try {
    parse(text, response);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadDataset, OzoneFixtureHasSevenPredictors) {
  const auto d = load_dataset(IHT_DATA_DIR "/ozone.csv", "ozone");
  EXPECT_EQ(d.n(), 330);
  EXPECT_EQ(d.p(), 7);
  EXPECT_EQ(d.response_name, "ozone");
  const std::vector<std::string> cols = {"dgpg", "hmdt", "vsty", "wdsp", "vdht", "sbtp", "ibtp"};
  EXPECT_EQ(d.column_names, cols);
}

TEST(LoadDataset, ResponseMayBeAnyColumn) {
  const auto d = parse("a,y,b\n1,2,3\n4,5,6\n7,8,10\n1,1,1\n2,0,5\n", "y");
  EXPECT_EQ(d.p(), 2);
  EXPECT_DOUBLE_EQ(d.y(1), 5.0);
  EXPECT_DOUBLE_EQ(d.X(2, 1), 10.0);
  EXPECT_EQ(d.column_names[1], "b");
}

TEST(LoadDataset, QuotedHeadersAndOtherDelimiters) {
  const auto d = parse("\"y\"; \"x1\" ;x2\n1;2;3\n4;5;6\n7;8;10\n1;1;1\n", "y", ';');
  EXPECT_EQ(d.n(), 4);
  EXPECT_EQ(d.column_names[0], "x1");
}

TEST(LoadDataset, TooFewRowsNamesTheConstraint) {
  EXPECT_NE(error_of("y,a,b\n1,2,3\n4,5,6\n7,8,9\n", "y").find("n < p + 2"), std::string::npos);
}

TEST(LoadDataset, NanCellReportsLocation) {
  const auto msg = error_of("y,a\n1,2\n3,NaN\n4,5\n6,7\n", "y");
  EXPECT_NE(msg.find("row"), std::string::npos) << msg;
  EXPECT_NE(msg.find("(a)"), std::string::npos) << msg;
}

TEST(LoadDataset, NonNumericCell) {
  EXPECT_FALSE(error_of("y,a\n1,2\n3,abc\n4,5\n6,7\n", "y").empty());
}

TEST(LoadDataset, MissingAndDuplicateResponse) {
  EXPECT_NE(error_of("a,b\n1,2\n3,4\n5,6\n7,8\n", "y").find("y"), std::string::npos);
  EXPECT_NE(error_of("y,y\n1,2\n3,4\n5,6\n7,8\n", "y").find("more than once"), std::string::npos);
}

TEST(LoadDataset, RaggedRow) { EXPECT_FALSE(error_of("y,a\n1,2\n3\n4,5\n6,7\n", "y").empty()); }

TEST(LoadDataset, MissingFile) { EXPECT_THROW(load_dataset("/nonexistent/x.csv", "y"), DataError); }

TEST(ApplyLog, ReplacesNamedColumns) {
  auto d = parse("y,a,b\n1,1,2\n2,2.718281828459045,3\n3,4,5\n4,5,6\n", "y");
  const std::vector<std::string> cols = {"a"};
  apply_log(d, cols);
  EXPECT_NEAR(d.X(1, 0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(d.X(1, 1), 3.0);
}

TEST(ApplyLog, RejectsNonPositiveAndUnknown) {
  auto d = parse("y,a\n1,1\n2,0\n3,4\n4,5\n", "y");
  const std::vector<std::string> a = {"a"}, z = {"zz"};
  EXPECT_THROW(apply_log(d, a), DataError);
  EXPECT_THROW(apply_log(d, z), DataError);
}

TEST(InvSqrtSpd, Identity) {
  EXPECT_TRUE(inv_sqrt_spd(MatrixXd::Identity(4, 4)).isApprox(MatrixXd::Identity(4, 4), 1e-14));
}

TEST(InvSqrtSpd, Diagonal) {
  const MatrixXd R = inv_sqrt_spd(Eigen::Vector2d(4, 9).asDiagonal());
  EXPECT_NEAR(R(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(R(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(R(0, 1), 0.0, 1e-15);
}

TEST(InvSqrtSpd, TwoByTwoSpectralFormula) {
  // [[2,1],[1,2]] has eigenpairs 3 (1,1)/sqrt2 and 1 (1,-1)/sqrt2, so
  // R = (3^{-1/2} + 1) / 2 on the diagonal and (3^{-1/2} - 1) / 2 off it.
  Eigen::Matrix2d S;
  S << 2, 1, 1, 2;
  const MatrixXd R = inv_sqrt_spd(S);
  const double a = 1.0 / std::sqrt(3.0);
  EXPECT_NEAR(R(0, 0), (a + 1) / 2, 1e-15);
  EXPECT_NEAR(R(0, 1), (a - 1) / 2, 1e-15);
  EXPECT_LT((R * S * R - MatrixXd::Identity(2, 2)).norm(), 1e-12);
}

TEST(InvSqrtSpd, RandomIllConditioned) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 6.0);
  for (int t = 0; t < 50; ++t) {
    const Index p = 2 + t % 7;
    const MatrixXd Q = fixture::random_orthogonal(p, rng);
    VectorXd ev(p);
    for (Index i = 0; i < p; ++i) ev(i) = std::pow(10.0, -U(rng));
    ev(0) = 1.0;
    const MatrixXd S = Q * ev.asDiagonal() * Q.transpose();
    const MatrixXd R = inv_sqrt_spd(S);
    EXPECT_LT((R * S * R - MatrixXd::Identity(p, p)).norm(), 1e-10 * p);
    EXPECT_LT((R - R.transpose()).norm(), 1e-12 * R.norm());
  }
}

TEST(InvSqrtSpd, SingularCarriesEigenvalue) {
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  S(0, 0) = 1;
  S(1, 1) = 2;
  try {
    inv_sqrt_spd(S);
    FAIL() << "expected SingularCovarianceError";
  } catch (const SingularCovarianceError& e) {
    EXPECT_NEAR(e.eigenvalue(), 0.0, 1e-15);
    EXPECT_EQ(e.index(), 0);
  }
}

TEST(Standardize, MomentInvariants) {
  const auto d = fixture::model22(150, 5, 0.5, 3);
  Dataset skewed = d;
  skewed.X.col(2) = skewed.X.col(2).array().exp() * 40.0 + 7.0;
  skewed.X.col(1) += 3.0 * skewed.X.col(0);
  const auto s = standardize(skewed);
  const double n = static_cast<double>(s.n());
  EXPECT_LT(s.Z_hat.colwise().mean().cwiseAbs().maxCoeff(), 1e-10 * std::sqrt(5.0));
  EXPECT_LT((s.Z_hat.transpose() * s.Z_hat / n - MatrixXd::Identity(5, 5)).norm(), 1e-8);
  EXPECT_LT(std::abs(s.Y_hat.mean()), 1e-10);
  EXPECT_NEAR(s.Y_hat.squaredNorm() / n, 1.0, 1e-10);
}

TEST(Standardize, FixedPointOnWhitenedData) {
  const auto d = fixture::model22(200, 3, 0.3, 4);
  const auto s = standardize(d);
  Dataset w;
  w.X = s.Z_hat;
  w.y = s.Y_hat;
  w.column_names = d.column_names;
  const auto s2 = standardize(w);
  EXPECT_LT((s2.Z_hat - s.Z_hat).norm(), 1e-8);
  EXPECT_LT((s2.sigma_inv_sqrt - MatrixXd::Identity(3, 3)).norm(), 1e-8);
  EXPECT_LT((s2.Y_hat - s.Y_hat).norm(), 1e-8);
}

TEST(Standardize, AffineEquivarianceOfGram) {
  std::mt19937_64 rng(5);
  const auto d = fixture::model22(120, 4, 0.4, 5);
  const auto s = standardize(d);
  const MatrixXd gram = s.Z_hat * s.Z_hat.transpose();
  for (int t = 0; t < 5; ++t) {
    const auto tr = fixture::random_affine(4, rng);
    const auto s2 = standardize(tr.apply(d));
    EXPECT_LT((s2.Z_hat * s2.Z_hat.transpose() - gram).norm(), 1e-8 * gram.norm());
    const double sign = tr.c < 0 ? -1.0 : 1.0;
    EXPECT_LT((s2.Y_hat - sign * s.Y_hat).norm(), 1e-8 * std::sqrt(120.0));
  }
}

TEST(Standardize, DegenerateInputsNameTheProblem) {
  auto d = fixture::model22(50, 3, 0.4, 6);
  Dataset c = d;
  c.X.col(1).setConstant(2.5);
  try {
    standardize(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Z2"), std::string::npos) << e.what();
  }
  Dataset y = d;
  y.y.setConstant(1.0);
  try {
    standardize(y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zero response variance"), std::string::npos);
  }
  Dataset collinear = d;
  collinear.X.col(2) = collinear.X.col(0) - 2.0 * collinear.X.col(1);
  EXPECT_THROW(standardize(collinear), SingularCovarianceError);
}
