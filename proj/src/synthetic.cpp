#include "gpae/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gpae/rng.hpp"

namespace gpae {

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "two-gaussians") return SyntheticKind::TwoGaussians;
  if (name == "two-moons") return SyntheticKind::TwoMoons;
  if (name == "lcd-like") return SyntheticKind::LcdLike;
  throw Error("unknown synthetic kind '" + name + "' (two-gaussians | two-moons | lcd-like)");
}

namespace {

nlohmann::json continuous_col(const std::string& name) {
  return {{"name", name}, {"kind", "continuous"}, {"immutable", false}};
}

nlohmann::json splits_for(int n) {
  int train = (n * 7) / 10;
  int val = (n - train) / 2;
  int test = n - train - val;
  return {{"train", train}, {"val", val}, {"test", test}};
}

}  // namespace

SyntheticData make_synthetic(SyntheticKind kind, int n, std::uint64_t seed) {
  if (n < 100) throw Error("make_synthetic: n must be >= 100");
  CounterRng rng(derive_seed(seed, "synthetic"));
  std::ostringstream csv;
  nlohmann::json schema;

  switch (kind) {
    case SyntheticKind::TwoGaussians: {
      // Unit-variance classes at (-2, 0) and (2, 0): 4 sigma apart, so the
      // analytic Bayes accuracy is Phi(2) ~ 0.977.
      csv << "x1,x2,label\n";
      for (int i = 0; i < n; ++i) {
        int label = i % 2;
        double cx = label == 1 ? 2.0 : -2.0;
        csv << format_double(cx + rng.normal()) << "," << format_double(rng.normal()) << ","
            << (label == 1 ? "pos" : "neg") << "\n";
      }
      schema["columns"] = {continuous_col("x1"), continuous_col("x2")};
      break;
    }
    case SyntheticKind::TwoMoons: {
      csv << "x1,x2,label\n";
      for (int i = 0; i < n; ++i) {
        int label = i % 2;
        double t = rng.uniform(0.0, std::numbers::pi);
        double x1, x2;
        if (label == 0) {
          x1 = std::cos(t);
          x2 = std::sin(t);
        } else {
          x1 = 1.0 - std::cos(t);
          x2 = 0.5 - std::sin(t);
        }
        x1 += 0.1 * rng.normal();
        x2 += 0.1 * rng.normal();
        csv << format_double(x1) << "," << format_double(x2) << "," << (label == 1 ? "pos" : "neg") << "\n";
      }
      schema["columns"] = {continuous_col("x1"), continuous_col("x2")};
      break;
    }
    case SyntheticKind::LcdLike: {
      // Five continuous lending-style features plus a binary loan term,
      // driven by two anisotropic Gaussian classes in a planted 2-D factor.
      // z1 carries most of the class signal; z2 is wide for the rejected
      // class and offset relative to the accepted class, so rejected
      // queries project onto the decision boundary away from the accepted
      // class's density ridge and the density pull has visible work to do
      // across the beta sweep.
      csv << "dti,loan_amount,interest_rate,annual_income,fico_score,term,label\n";
      for (int i = 0; i < n; ++i) {
        int label = i % 2;
        double z1, z2;
        if (label == 1) {
          z1 = 0.9 + 0.5 * rng.normal();
          z2 = 0.5 * rng.normal();
        } else {
          z1 = -0.9 + 0.9 * rng.normal();
          z2 = 1.8 + 2.2 * rng.normal();
        }
        double dti = 20.0 + 5.0 * z1 - 2.0 * z2 + 0.5 * rng.normal();
        double amount = 15000.0 + 4000.0 * z1 + 1500.0 * z2 + 300.0 * rng.normal();
        double rate = 12.0 + 3.0 * z1 + 0.2 * rng.normal();
        double income = 70000.0 - 8000.0 * z1 + 5000.0 * z2 + 1000.0 * rng.normal();
        double fico = 690.0 - 25.0 * z1 + 10.0 * z2 + 4.0 * rng.normal();
        const char* term = rng.uniform() < sigmoid(0.9 * z1 + 0.3 * z2) ? "60" : "36";
        csv << format_double(dti) << "," << format_double(amount) << "," << format_double(rate) << ","
            << format_double(income) << "," << format_double(fico) << "," << term << ","
            << (label == 1 ? "pos" : "neg") << "\n";
      }
      schema["columns"] = {continuous_col("dti"),
                           continuous_col("loan_amount"),
                           continuous_col("interest_rate"),
                           continuous_col("annual_income"),
                           continuous_col("fico_score"),
                           {{"name", "term"},
                            {"kind", "categorical"},
                            {"levels", nlohmann::json::array({"36", "60"})},
                            {"immutable", false}}};
      break;
    }
  }

  schema["label_column"] = "label";
  schema["positive_label"] = "pos";
  schema["splits"] = splits_for(n);
  schema["seed"] = seed;

  SyntheticData out;
  out.csv = csv.str();
  out.schema_json = std::move(schema);
  return out;
}

void write_synthetic(SyntheticKind kind, int n, std::uint64_t seed, const std::string& out_dir) {
  SyntheticData data = make_synthetic(kind, n, seed);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir + "/data.csv", std::ios::binary);
    if (!f) throw Error("write_synthetic: cannot write " + out_dir + "/data.csv");
    f << data.csv;
  }
  {
    std::ofstream f(out_dir + "/schema.json", std::ios::binary);
    if (!f) throw Error("write_synthetic: cannot write " + out_dir + "/schema.json");
    f << data.schema_json.dump(2) << "\n";
  }
}

}  // namespace gpae
