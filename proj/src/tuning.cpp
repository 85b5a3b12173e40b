#include <mivs/error.hpp>
#include <mivs/glm.hpp>
#include <mivs/parallel.hpp>
#include <mivs/rng.hpp>
#include <mivs/tuning.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mivs {

Method Method::initializer() const
{
    switch (kind) {
    case MethodKind::SaLasso:
    case MethodKind::SaEnet: return {MethodKind::SEnet, scheme};
    case MethodKind::GaLasso: return {MethodKind::GLasso, scheme};
    default: return *this;
    }
}

std::string Method::name() const
{
    std::string base;
    switch (kind) {
    case MethodKind::SLasso: base = "slasso"; break;
    case MethodKind::SaLasso: base = "salasso"; break;
    case MethodKind::SEnet: base = "senet"; break;
    case MethodKind::SaEnet: base = "saenet"; break;
    case MethodKind::GLasso: base = "glasso"; break;
    case MethodKind::GaLasso: base = "galasso"; break;
    }
    if (scheme == WeightScheme::FractionObserved) base += ":w";
    return base;
}

Method parse_method(std::string_view text)
{
    Method m;
    std::string_view base = text;
    if (base.size() > 2 && base.substr(base.size() - 2) == ":w") {
        m.scheme = WeightScheme::FractionObserved;
        base.remove_suffix(2);
    }
    if (base == "slasso") m.kind = MethodKind::SLasso;
    else if (base == "salasso") m.kind = MethodKind::SaLasso;
    else if (base == "senet") m.kind = MethodKind::SEnet;
    else if (base == "saenet") m.kind = MethodKind::SaEnet;
    else if (base == "glasso") m.kind = MethodKind::GLasso;
    else if (base == "galasso") m.kind = MethodKind::GaLasso;
    else throw InputError("unknown method '" + std::string(text) + "'");
    if (m.grouped() && m.scheme == WeightScheme::FractionObserved) {
        throw InputError("grouped methods have no observation-weight variant: '" + std::string(text) + "'");
    }
    return m;
}

std::vector<double> default_alpha_grid()
{
    std::vector<double> a{kAlphaFloor};
    for (int k = 1; k <= 10; ++k) a.push_back(k / 10.0);
    return a;
}

TuningGrid build_grid(double lambda_max, double ratio, int size, double alpha)
{
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
        throw NumericalError("lambda_max must be positive and finite");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("lambda_min_ratio must lie in (0, 1)");
    if (size < 1) throw std::invalid_argument("grid size must be positive");
    TuningGrid g;
    g.alpha = alpha;
    g.lambda_max = lambda_max;
    g.lambda_min_ratio = ratio;
    g.lambdas.resize(size);
    g.lambdas[0] = lambda_max;
    const double log_ratio = std::log(ratio);
    for (int k = 1; k < size; ++k) {
        g.lambdas[k] = lambda_max * std::exp(log_ratio * k / (size - 1));
    }
    if (size > 1) g.lambdas.back() = lambda_max * ratio;
    return g;
}

std::vector<int> FoldMap::validation(int k) const
{
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(fold_of_subject.size()); ++i) {
        if (fold_of_subject[i] == k) out.push_back(i);
    }
    return out;
}

std::vector<int> FoldMap::training(int k) const
{
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(fold_of_subject.size()); ++i) {
        if (fold_of_subject[i] != k) out.push_back(i);
    }
    return out;
}

FoldMap assign_folds(int n, int K, std::uint64_t seed)
{
    if (K < 2) throw InputError("cross-validation needs at least 2 folds");
    if (K > n) throw InputError("more folds (" + std::to_string(K) + ") than subjects (" + std::to_string(n) + ")");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xf01d));
    std::shuffle(order.begin(), order.end(), rng);
    FoldMap map;
    map.K = K;
    map.fold_of_subject.assign(n, 0);
    for (int pos = 0; pos < n; ++pos) map.fold_of_subject[order[pos]] = pos % K;
    return map;
}

FitContext make_context(const MultipleImputationSet& set, const Method& method, Family family)
{
    if (family == Family::Binomial) set.require_binary_outcome();
    FitContext ctx;
    ctx.family = family;
    ctx.view = standardize(set, method.grouped() ? StandardizeMode::PerDataset : StandardizeMode::Stacked);
    ctx.outcome = set.outcome();
    ctx.weights = observation_weights(set, method.grouped() ? WeightScheme::Equal : method.scheme);
    return ctx;
}

namespace {

PenaltySpec base_penalty(const Method& method, int p)
{
    if (method.grouped()) return PenaltySpec::group_lasso(p);
    if (method.tunes_alpha()) return PenaltySpec::elastic_net(1.0, p);
    return PenaltySpec::lasso(p);
}

PenaltySpec with_alpha(PenaltySpec spec, double alpha)
{
    if (spec.family == PenaltyFamily::ElasticNet) spec.alpha = alpha;
    return spec;
}

double stacked_validation_error(const FitContext& ctx, const std::vector<int>& subjects, const StackedFit& fit)
{
    double num = 0.0, den = 0.0;
    for (int d = 0; d < ctx.D(); ++d) {
        for (int i : subjects) {
            const double eta = fit.mu + ctx.view.X[d].row(i).dot(fit.beta);
            const double o = ctx.weights.o[i];
            num += o * glm::prediction_error(ctx.family, ctx.outcome[i], eta);
            den += o;
        }
    }
    // A validation fold made only of subjects with zero weight: fall back to
    // the unweighted mean.
    if (!(den > 0.0)) {
        for (int d = 0; d < ctx.D(); ++d) {
            for (int i : subjects) {
                num += glm::prediction_error(ctx.family, ctx.outcome[i], fit.mu + ctx.view.X[d].row(i).dot(fit.beta));
            }
        }
        return num / (static_cast<double>(subjects.size()) * ctx.D());
    }
    return num / den;
}

double grouped_validation_error(const FitContext& ctx, const std::vector<int>& subjects, const GroupedFit& fit)
{
    double total = 0.0;
    for (int d = 0; d < ctx.D(); ++d) {
        double sum = 0.0;
        for (int i : subjects) {
            const double eta = fit.mu[d] + ctx.view.X[d].row(i).dot(fit.beta.row(d));
            sum += glm::prediction_error(ctx.family, ctx.outcome[i], eta);
        }
        total += sum / static_cast<double>(subjects.size());
    }
    return total / ctx.D();
}

void check_fold_classes(const FitContext& ctx, const FoldMap& folds)
{
    if (ctx.family != Family::Binomial) return;
    for (int k = 0; k < folds.K; ++k) {
        for (const auto& part : {folds.training(k), folds.validation(k)}) {
            bool zero = false, one = false;
            for (int i : part) (ctx.outcome[i] == 1.0 ? one : zero) = true;
            if (!(zero && one)) {
                throw InputError("fold " + std::to_string(k + 1) +
                                 " has a single outcome class; choose a different seed or number of folds");
            }
        }
    }
}

} // namespace

std::vector<TuningGrid> build_grids(const FitContext& ctx, const Method& method, const PenaltySpec& base,
                                    const TuningOptions& options)
{
    const double ratio = options.ratio_for(method);
    std::vector<TuningGrid> grids;
    if (method.grouped()) {
        auto prob = make_grouped_problem(ctx.view, ctx.outcome, ctx.family);
        grids.push_back(build_grid(grouped_lambda_max(prob, base), ratio, options.grid_size));
        return grids;
    }
    auto prob = make_stacked_problem(ctx.view, ctx.outcome, ctx.weights, ctx.family);
    const std::vector<double> alphas = method.tunes_alpha() ? options.alphas : std::vector<double>{1.0};
    for (double a : alphas) {
        const double alpha = std::max(a, kAlphaFloor);
        const auto spec = with_alpha(base, alpha);
        grids.push_back(build_grid(
            stacked_lambda_max(prob, spec, options.stacked_controls.weight_floor), ratio, options.grid_size, alpha));
    }
    return grids;
}

CvResult cross_validate(const FitContext& ctx, const Method& method, const PenaltySpec& base,
                        const std::vector<TuningGrid>& grids, const FoldMap& folds, const TuningOptions& options)
{
    check_fold_classes(ctx, folds);
    const int K = folds.K;
    std::vector<std::vector<int>> validation(K), training(K);
    for (int k = 0; k < K; ++k) {
        validation[k] = folds.validation(k);
        training[k] = folds.training(k);
    }

    // errors[g][k][l]
    std::vector<std::vector<std::vector<double>>> errors(grids.size(), std::vector<std::vector<double>>(K));

    if (method.grouped()) {
        std::vector<GroupedProblem> train(K);
        for (int k = 0; k < K; ++k) train[k] = make_grouped_problem(ctx.view, ctx.outcome, ctx.family, training[k]);
        parallel_for(grids.size() * K, options.threads, [&](std::size_t t) {
            const std::size_t g = t / K;
            const int k = static_cast<int>(t % K);
            auto& out = errors[g][k];
            GroupedFit prev;
            bool warm = false;
            for (double lambda : grids[g].lambdas) {
                GroupedFit fit = fit_grouped(train[k], base, lambda, options.grouped_controls, warm ? &prev : nullptr);
                out.push_back(grouped_validation_error(ctx, validation[k], fit));
                prev = std::move(fit);
                warm = true;
            }
        });
    } else {
        std::vector<StackedProblem> train(K);
        for (int k = 0; k < K; ++k) {
            train[k] = make_stacked_problem(ctx.view, ctx.outcome, ctx.weights, ctx.family, training[k]);
        }
        parallel_for(grids.size() * K, options.threads, [&](std::size_t t) {
            const std::size_t g = t / K;
            const int k = static_cast<int>(t % K);
            const auto spec = with_alpha(base, grids[g].alpha);
            auto& out = errors[g][k];
            StackedFit prev;
            bool warm = false;
            for (double lambda : grids[g].lambdas) {
                StackedFit fit = fit_stacked(train[k], spec, lambda, options.stacked_controls, warm ? &prev : nullptr);
                out.push_back(stacked_validation_error(ctx, validation[k], fit));
                prev = std::move(fit);
                warm = true;
            }
        });
    }

    CvResult result;
    result.folds = folds;
    for (std::size_t g = 0; g < grids.size(); ++g) {
        for (std::size_t l = 0; l < grids[g].lambdas.size(); ++l) {
            Candidate c;
            c.alpha = grids[g].alpha;
            c.lambda = grids[g].lambdas[l];
            c.grid = static_cast<int>(g);
            c.index = static_cast<int>(l);
            for (int k = 0; k < K; ++k) c.fold_errors.push_back(errors[g][k][l]);
            double mean = 0.0;
            for (double e : c.fold_errors) mean += e;
            mean /= K;
            double ss = 0.0;
            for (double e : c.fold_errors) ss += (e - mean) * (e - mean);
            c.mean_error = mean;
            c.se = std::sqrt(ss / (K - 1)) / std::sqrt(static_cast<double>(K));
            result.candidates.push_back(std::move(c));
        }
    }
    result.selected = select_one_se(result);
    result.rule = grids.size() > 1 ? "one-se, largest lambda*alpha" : "one-se, largest lambda";
    return result;
}

int select_one_se(const CvResult& result)
{
    const auto& c = result.candidates;
    if (c.empty()) throw std::invalid_argument("no candidates to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (c[i].mean_error < c[best].mean_error) best = i;
    }
    const double threshold = c[best].mean_error + c[best].se;
    int chosen = -1;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!(c[i].mean_error <= threshold)) continue;
        if (chosen < 0) {
            chosen = static_cast<int>(i);
            continue;
        }
        const auto& a = c[i];
        const auto& b = c[chosen];
        const double la = a.lambda * a.alpha, lb = b.lambda * b.alpha;
        if (la > lb || (la == lb && (a.lambda > b.lambda || (a.lambda == b.lambda && a.alpha > b.alpha)))) {
            chosen = static_cast<int>(i);
        }
    }
    return chosen;
}

StackedFit fit_stacked_path(const StackedProblem& problem, const PenaltySpec& spec, const TuningGrid& grid,
                            int stop, const SolverControls& controls)
{
    StackedFit fit;
    for (int l = 0; l <= stop; ++l) {
        fit = fit_stacked(problem, spec, grid.lambdas[l], controls, l > 0 ? &fit : nullptr);
    }
    return fit;
}

GroupedFit fit_grouped_path(const GroupedProblem& problem, const PenaltySpec& spec, const TuningGrid& grid,
                            int stop, const SolverControls& controls)
{
    GroupedFit fit;
    for (int l = 0; l <= stop; ++l) {
        fit = fit_grouped(problem, spec, grid.lambdas[l], controls, l > 0 ? &fit : nullptr);
    }
    return fit;
}

namespace {

struct StageOutcome
{
    StageRecord record;
    std::optional<StackedFit> stacked;
    std::optional<GroupedFit> grouped;
};

StageOutcome run_stage(const FitContext& ctx, const Method& method, const PenaltySpec& base,
                       const TuningOptions& options, const std::optional<FixedTuning>& fixed)
{
    StageOutcome out;
    out.record.method = method;
    if (fixed) {
        double alpha = 1.0;
        if (method.tunes_alpha()) {
            if (!fixed->alpha) throw InputError(method.name() + " needs --alpha when --lambda is given");
            alpha = *fixed->alpha;
        }
        out.record.penalty = with_alpha(base, alpha);
        out.record.penalty.validate(ctx.p());
        out.record.alpha = alpha;
        out.record.lambda = fixed->lambda;
        if (method.grouped()) {
            auto prob = make_grouped_problem(ctx.view, ctx.outcome, ctx.family);
            out.grouped = fit_grouped(prob, out.record.penalty, fixed->lambda, options.grouped_controls);
        } else {
            auto prob = make_stacked_problem(ctx.view, ctx.outcome, ctx.weights, ctx.family);
            out.stacked = fit_stacked(prob, out.record.penalty, fixed->lambda, options.stacked_controls);
        }
        return out;
    }

    out.record.grids = build_grids(ctx, method, base, options);
    const auto folds = assign_folds(ctx.n(), options.folds, options.seed);
    out.record.cv = cross_validate(ctx, method, base, out.record.grids, folds, options);
    const auto& best = out.record.cv->best();
    const auto& grid = out.record.grids[best.grid];
    out.record.alpha = best.alpha;
    out.record.lambda = best.lambda;
    out.record.penalty = with_alpha(base, best.alpha);
    if (method.grouped()) {
        auto prob = make_grouped_problem(ctx.view, ctx.outcome, ctx.family);
        out.grouped = fit_grouped_path(prob, out.record.penalty, grid, best.index, options.grouped_controls);
    } else {
        auto prob = make_stacked_problem(ctx.view, ctx.outcome, ctx.weights, ctx.family);
        out.stacked = fit_stacked_path(prob, out.record.penalty, grid, best.index, options.stacked_controls);
    }
    return out;
}

} // namespace

MethodFit fit_method(const MultipleImputationSet& set, const Method& method, const TuningOptions& options,
                     const std::optional<FixedTuning>& fixed)
{
    MethodFit result;
    result.method = method;
    result.context = make_context(set, method, set.detect_family());
    const auto& ctx = result.context;
    const int p = ctx.p();

    PenaltySpec base = base_penalty(method, p);
    if (method.adaptive()) {
        const Method init = method.initializer();
        auto first = run_stage(ctx, init, base_penalty(init, p), options, std::nullopt);
        Eigen::VectorXd weights;
        double gamma = 0.0;
        if (method.grouped()) {
            gamma = grouped_gamma(p, ctx.n(), ctx.D());
            weights = adaptive_weights_grouped(first.grouped->beta, ctx.n(), ctx.D(), gamma);
        } else {
            gamma = stacked_gamma(p, ctx.n(), ctx.D());
            weights = adaptive_weights_stacked(first.stacked->beta, ctx.n(), ctx.D(), gamma);
        }
        result.stages.push_back(std::move(first.record));
        base = base.with_adaptive_weights(std::move(weights), gamma);
    }
    auto last = run_stage(ctx, method, base, options, fixed);
    result.stages.push_back(std::move(last.record));
    result.stacked = std::move(last.stacked);
    result.grouped = std::move(last.grouped);
    return result;
}

Eigen::VectorXd MethodFit::standardized_estimate() const
{
    if (grouped) return pool_grouped_coefficients(grouped->beta);
    return stacked->beta;
}

Eigen::MatrixXd MethodFit::per_imputation_original() const
{
    if (!grouped) throw std::logic_error("per-imputation estimates exist only for grouped fits");
    Eigen::MatrixXd out(context.D(), context.p());
    for (int d = 0; d < context.D(); ++d) {
        out.row(d) = back_transform({grouped->mu[d], grouped->beta.row(d).transpose()}, context.view, d)
                         .beta.transpose();
    }
    return out;
}

Coefficients MethodFit::original_estimate() const
{
    if (stacked) return back_transform({stacked->mu, stacked->beta}, context.view, 0);
    Coefficients pooled;
    pooled.intercept = 0.0;
    pooled.beta = Eigen::VectorXd::Zero(context.p());
    for (int d = 0; d < context.D(); ++d) {
        auto c = back_transform({grouped->mu[d], grouped->beta.row(d).transpose()}, context.view, d);
        pooled.intercept += c.intercept / context.D();
        pooled.beta += c.beta / context.D();
    }
    // Inactive groups stay exactly zero after pooling.
    for (int j = 0; j < context.p(); ++j) {
        if (grouped->beta.col(j).squaredNorm() == 0.0) pooled.beta[j] = 0.0;
    }
    return pooled;
}

std::vector<bool> MethodFit::selected() const
{
    std::vector<bool> s(context.p(), false);
    if (stacked) {
        for (int j : stacked->active_set) s[j] = true;
    } else {
        for (int j : grouped->active_groups) s[j] = true;
    }
    return s;
}

bool MethodFit::converged() const
{
    return stacked ? stacked->converged : grouped->converged;
}

} // namespace mivs
