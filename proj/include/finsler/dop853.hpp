#pragma once

// Explicit Runge-Kutta method of order 8(5,3) with the 7th-order continuous
// extension of Dormand and Prince, following the step-size control of
// Hairer, Norsett and Wanner, "Solving ODEs I", 2nd ed., DOP853.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "finsler/error.hpp"

namespace finsler {

namespace dop853_tableau {
inline constexpr double c2 = 0.526001519587677318785587544488E-01;
inline constexpr double c3 = 0.789002279381515978178381316732E-01;
inline constexpr double c4 = 0.118350341907227396726757197510E+00;
inline constexpr double c5 = 0.281649658092772603273242802490E+00;
inline constexpr double c6 = 0.333333333333333333333333333333E+00;
inline constexpr double c7 = 0.25E+00;
inline constexpr double c8 = 0.307692307692307692307692307692E+00;
inline constexpr double c9 = 0.651282051282051282051282051282E+00;
inline constexpr double c10 = 0.6E+00;
inline constexpr double c11 = 0.857142857142857142857142857142E+00;
inline constexpr double c14 = 0.1E+00;
inline constexpr double c15 = 0.2E+00;
inline constexpr double c16 = 0.777777777777777777777777777778E+00;
inline constexpr double b1 = 5.42937341165687622380535766363E-2;
inline constexpr double b6 = 4.45031289275240888144113950566E0;
inline constexpr double b7 = 1.89151789931450038304281599044E0;
inline constexpr double b8 = -5.8012039600105847814672114227E0;
inline constexpr double b9 = 3.1116436695781989440891606237E-1;
inline constexpr double b10 = -1.52160949662516078556178806805E-1;
inline constexpr double b11 = 2.01365400804030348374776537501E-1;
inline constexpr double b12 = 4.47106157277725905176885569043E-2;
inline constexpr double bhh1 = 0.244094488188976377952755905512E+00;
inline constexpr double bhh2 = 0.733846688281611857341361741547E+00;
inline constexpr double bhh3 = 0.220588235294117647058823529412E-01;
inline constexpr double er1 = 0.1312004499419488073250102996E-01;
inline constexpr double er6 = -0.1225156446376204440720569753E+01;
inline constexpr double er7 = -0.4957589496572501915214079952E+00;
inline constexpr double er8 = 0.1664377182454986536961530415E+01;
inline constexpr double er9 = -0.3503288487499736816886487290E+00;
inline constexpr double er10 = 0.3341791187130174790297318841E+00;
inline constexpr double er11 = 0.8192320648511571246570742613E-01;
inline constexpr double er12 = -0.2235530786388629525884427845E-01;
inline constexpr double a21 = 5.26001519587677318785587544488E-2;
inline constexpr double a31 = 1.97250569845378994544595329183E-2;
inline constexpr double a32 = 5.91751709536136983633785987549E-2;
inline constexpr double a41 = 2.95875854768068491816892993775E-2;
inline constexpr double a43 = 8.87627564304205475450678981324E-2;
inline constexpr double a51 = 2.41365134159266685502369798665E-1;
inline constexpr double a53 = -8.84549479328286085344864962717E-1;
inline constexpr double a54 = 9.24834003261792003115737966543E-1;
inline constexpr double a61 = 3.7037037037037037037037037037E-2;
inline constexpr double a64 = 1.70828608729473871279604482173E-1;
inline constexpr double a65 = 1.25467687566822425016691814123E-1;
inline constexpr double a71 = 3.7109375E-2;
inline constexpr double a74 = 1.70252211019544039314978060272E-1;
inline constexpr double a75 = 6.02165389804559606850219397283E-2;
inline constexpr double a76 = -1.7578125E-2;
inline constexpr double a81 = 3.70920001185047927108779319836E-2;
inline constexpr double a84 = 1.70383925712239993810214054705E-1;
inline constexpr double a85 = 1.07262030446373284651809199168E-1;
inline constexpr double a86 = -1.53194377486244017527936158236E-2;
inline constexpr double a87 = 8.27378916381402288758473766002E-3;
inline constexpr double a91 = 6.24110958716075717114429577812E-1;
inline constexpr double a94 = -3.36089262944694129406857109825E0;
inline constexpr double a95 = -8.68219346841726006818189891453E-1;
inline constexpr double a96 = 2.75920996994467083049415600797E1;
inline constexpr double a97 = 2.01540675504778934086186788979E1;
inline constexpr double a98 = -4.34898841810699588477366255144E1;
inline constexpr double a101 = 4.77662536438264365890433908527E-1;
inline constexpr double a104 = -2.48811461997166764192642586468E0;
inline constexpr double a105 = -5.90290826836842996371446475743E-1;
inline constexpr double a106 = 2.12300514481811942347288949897E1;
inline constexpr double a107 = 1.52792336328824235832596922938E1;
inline constexpr double a108 = -3.32882109689848629194453265587E1;
inline constexpr double a109 = -2.03312017085086261358222928593E-2;
inline constexpr double a111 = -9.3714243008598732571704021658E-1;
inline constexpr double a1110 = -3.0467644718982195003823669022E0;
inline constexpr double a114 = 5.18637242884406370830023853209E0;
inline constexpr double a115 = 1.09143734899672957818500254654E0;
inline constexpr double a116 = -8.14978701074692612513997267357E0;
inline constexpr double a117 = -1.85200656599969598641566180701E1;
inline constexpr double a118 = 2.27394870993505042818970056734E1;
inline constexpr double a119 = 2.49360555267965238987089396762E0;
inline constexpr double a121 = 2.27331014751653820792359768449E0;
inline constexpr double a1210 = 1.23605671757943030647266201528E1;
inline constexpr double a1211 = 6.43392746015763530355970484046E-1;
inline constexpr double a124 = -1.05344954667372501984066689879E1;
inline constexpr double a125 = -2.00087205822486249909675718444E0;
inline constexpr double a126 = -1.79589318631187989172765950534E1;
inline constexpr double a127 = 2.79488845294199600508499808837E1;
inline constexpr double a128 = -2.85899827713502369474065508674E0;
inline constexpr double a129 = -8.87285693353062954433549289258E0;
inline constexpr double a141 = 5.61675022830479523392909219681E-2;
inline constexpr double a1410 = 1.5329179827876569731206322685E-1;
inline constexpr double a1411 = 8.20105229563468988491666602057E-3;
inline constexpr double a1412 = 7.56789766054569976138603589584E-3;
inline constexpr double a1413 = -8.298E-3;
inline constexpr double a147 = 2.53500210216624811088794765333E-1;
inline constexpr double a148 = -2.46239037470802489917441475441E-1;
inline constexpr double a149 = -1.24191423263816360469010140626E-1;
inline constexpr double a151 = 3.18346481635021405060768473261E-2;
inline constexpr double a1511 = -1.08347328697249322858509316994E-4;
inline constexpr double a1512 = 3.82571090835658412954920192323E-4;
inline constexpr double a1513 = -3.40465008687404560802977114492E-4;
inline constexpr double a1514 = 1.41312443674632500278074618366E-1;
inline constexpr double a156 = 2.83009096723667755288322961402E-2;
inline constexpr double a157 = 5.35419883074385676223797384372E-2;
inline constexpr double a158 = -5.49237485713909884646569340306E-2;
inline constexpr double a161 = -4.28896301583791923408573538692E-1;
inline constexpr double a1613 = -1.39902416515901462129418009734E-3;
inline constexpr double a1614 = 2.9475147891527723389556272149E0;
inline constexpr double a1615 = -9.15095847217987001081870187138E0;
inline constexpr double a166 = -4.69762141536116384314449447206E0;
inline constexpr double a167 = 7.68342119606259904184240953878E0;
inline constexpr double a168 = 4.06898981839711007970213554331E0;
inline constexpr double a169 = 3.56727187455281109270669543021E-1;
inline constexpr double d41 = -0.84289382761090128651353491142E+01;
inline constexpr double d46 = 0.56671495351937776962531783590E+00;
inline constexpr double d47 = -0.30689499459498916912797304727E+01;
inline constexpr double d48 = 0.23846676565120698287728149680E+01;
inline constexpr double d49 = 0.21170345824450282767155149946E+01;
inline constexpr double d410 = -0.87139158377797299206789907490E+00;
inline constexpr double d411 = 0.22404374302607882758541771650E+01;
inline constexpr double d412 = 0.63157877876946881815570249290E+00;
inline constexpr double d413 = -0.88990336451333310820698117400E-01;
inline constexpr double d414 = 0.18148505520854727256656404962E+02;
inline constexpr double d415 = -0.91946323924783554000451984436E+01;
inline constexpr double d416 = -0.44360363875948939664310572000E+01;
inline constexpr double d51 = 0.10427508642579134603413151009E+02;
inline constexpr double d56 = 0.24228349177525818288430175319E+03;
inline constexpr double d57 = 0.16520045171727028198505394887E+03;
inline constexpr double d58 = -0.37454675472269020279518312152E+03;
inline constexpr double d59 = -0.22113666853125306036270938578E+02;
inline constexpr double d510 = 0.77334326684722638389603898808E+01;
inline constexpr double d511 = -0.30674084731089398182061213626E+02;
inline constexpr double d512 = -0.93321305264302278729567221706E+01;
inline constexpr double d513 = 0.15697238121770843886131091075E+02;
inline constexpr double d514 = -0.31139403219565177677282850411E+02;
inline constexpr double d515 = -0.93529243588444783865713862664E+01;
inline constexpr double d516 = 0.35816841486394083752465898540E+02;
inline constexpr double d61 = 0.19985053242002433820987653617E+02;
inline constexpr double d66 = -0.38703730874935176555105901742E+03;
inline constexpr double d67 = -0.18917813819516756882830838328E+03;
inline constexpr double d68 = 0.52780815920542364900561016686E+03;
inline constexpr double d69 = -0.11573902539959630126141871134E+02;
inline constexpr double d610 = 0.68812326946963000169666922661E+01;
inline constexpr double d611 = -0.10006050966910838403183860980E+01;
inline constexpr double d612 = 0.77771377980534432092869265740E+00;
inline constexpr double d613 = -0.27782057523535084065932004339E+01;
inline constexpr double d614 = -0.60196695231264120758267380846E+02;
inline constexpr double d615 = 0.84320405506677161018159903784E+02;
inline constexpr double d616 = 0.11992291136182789328035130030E+02;
inline constexpr double d71 = -0.25693933462703749003312586129E+02;
inline constexpr double d76 = -0.15418974869023643374053993627E+03;
inline constexpr double d77 = -0.23152937917604549567536039109E+03;
inline constexpr double d78 = 0.35763911791061412378285349910E+03;
inline constexpr double d79 = 0.93405324183624310003907691704E+02;
inline constexpr double d710 = -0.37458323136451633156875139351E+02;
inline constexpr double d711 = 0.10409964950896230045147246184E+03;
inline constexpr double d712 = 0.29840293426660503123344363579E+02;
inline constexpr double d713 = -0.43533456590011143754432175058E+02;
inline constexpr double d714 = 0.96324553959188282948394950600E+02;
inline constexpr double d715 = -0.39177261675615439165231486172E+02;
inline constexpr double d716 = -0.14972683625798562581422125276E+03;}  // namespace dop853_tableau

template <std::size_t N>
class Dop853 {
 public:
  using Vector = std::array<double, N>;
  using Field = std::function<Vector(double, const Vector&)>;

  struct Options {
    double rel_tol = 1e-12;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 2'000'000;
  };

  Dop853(Field field, Options options) : field_(std::move(field)), opt_(options) {}

  void reset(double t0, const Vector& y0) {
    t_ = t0;
    y_ = y0;
    t_old_ = t0;
    y_old_ = y0;
    h_ = 0.0;
    k_[0] = eval(t_, y_);
    steps_ = 0;
    dense_ready_ = false;
    has_step_ = false;
  }

  /// One accepted step toward t_end, never stepping past it. Direction is
  /// taken from the sign of t_end - time().
  void step(double t_end) {
    using namespace dop853_tableau;
    const double span = t_end - t_;
    if (span == 0.0) return;
    const double dir = span > 0.0 ? 1.0 : -1.0;
    const double hmax = std::min(std::abs(span), opt_.max_step);
    if (h_ == 0.0 || (h_ > 0.0) != (dir > 0.0)) h_ = initial_step(hmax, dir);
    bool reject = false;
    for (;;) {
      if (++steps_ > opt_.max_steps) throw Error(ErrorKind::StepFailure, "maximum number of steps exceeded");
      if (0.1 * std::abs(h_) <= std::abs(t_) * kRound) throw Error(ErrorKind::StepFailure, "step size underflow");
      double h = dir * std::min(std::abs(h_), hmax);
      bool last = false;
      if ((t_ + 1.01 * h - t_end) * dir > 0.0) {
        h = t_end - t_;
        last = true;
      }
      Vector y_new;
      Vector incr;
      stages(h, y_new, incr);
      const double err = std::abs(h) * error_norm(h, y_new, incr);
      const double fac11 = std::pow(err, 0.125);
      const double fac = std::clamp(fac11 / kSafe, 1.0 / 6.0, 3.0);
      double h_new = h / fac;
      if (err <= 1.0) {
        k_[12] = eval(t_ + h, y_new);
        t_old_ = t_;
        y_old_ = y_;
        h_last_ = h;
        t_ = last ? t_end : t_ + h;
        y_ = y_new;
        if (std::abs(h_new) > opt_.max_step) h_new = dir * opt_.max_step;
        if (reject) h_new = dir * std::min(std::abs(h_new), std::abs(h));
        h_ = h_new;
        saved_ = k_;
        k_[0] = k_[12];
        dense_ready_ = false;
        has_step_ = true;
        return;
      }
      h_ = h / std::min(3.0, fac11 / kSafe);
      reject = true;
    }
  }

  double time() const noexcept { return t_; }
  const Vector& state() const noexcept { return y_; }
  double previous_time() const noexcept { return t_old_; }
  const Vector& previous_state() const noexcept { return y_old_; }
  std::size_t evaluations() const noexcept { return evals_; }

  /// Continuous extension over the last accepted step [previous_time, time].
  Vector dense(double t) const {
    if (!has_step_) return y_;
    if (!dense_ready_) prepare_dense();
    const double s = (t - t_old_) / h_last_;
    const double s1 = 1.0 - s;
    Vector out;
    for (std::size_t i = 0; i < N; ++i) {
      out[i] = rc_[0][i] +
               s * (rc_[1][i] +
                    s1 * (rc_[2][i] +
                          s * (rc_[3][i] + s1 * (rc_[4][i] + s * (rc_[5][i] + s1 * (rc_[6][i] + s * rc_[7][i]))))));
    }
    return out;
  }

 private:
  static constexpr double kSafe = 0.9;
  static constexpr double kRound = 2.3e-16;

  Vector eval(double t, const Vector& y) const {
    ++evals_;
    return field_(t, y);
  }

  // Combination y + h * sum_j a_j K_j over the listed stages.
  template <std::size_t M>
  Vector combine(const Vector& y, double h, const std::array<std::pair<int, double>, M>& terms,
                 const std::array<Vector, 16>& k) const {
    Vector out;
    for (std::size_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (const auto& [j, a] : terms) acc += a * k[j][i];
      out[i] = y[i] + h * acc;
    }
    return out;
  }

  void stages(double h, Vector& y_new, Vector& incr) {
    using namespace dop853_tableau;
    using T1 = std::array<std::pair<int, double>, 1>;
    using T2 = std::array<std::pair<int, double>, 2>;
    using T3 = std::array<std::pair<int, double>, 3>;
    using T4 = std::array<std::pair<int, double>, 4>;
    using T5 = std::array<std::pair<int, double>, 5>;
    using T6 = std::array<std::pair<int, double>, 6>;
    using T7 = std::array<std::pair<int, double>, 7>;
    using T8 = std::array<std::pair<int, double>, 8>;
    using T9 = std::array<std::pair<int, double>, 9>;
    auto& k = k_;
    k[1] = eval(t_ + c2 * h, combine(y_, h, T1{{{0, a21}}}, k));
    k[2] = eval(t_ + c3 * h, combine(y_, h, T2{{{0, a31}, {1, a32}}}, k));
    k[3] = eval(t_ + c4 * h, combine(y_, h, T2{{{0, a41}, {2, a43}}}, k));
    k[4] = eval(t_ + c5 * h, combine(y_, h, T3{{{0, a51}, {2, a53}, {3, a54}}}, k));
    k[5] = eval(t_ + c6 * h, combine(y_, h, T3{{{0, a61}, {3, a64}, {4, a65}}}, k));
    k[6] = eval(t_ + c7 * h, combine(y_, h, T4{{{0, a71}, {3, a74}, {4, a75}, {5, a76}}}, k));
    k[7] = eval(t_ + c8 * h, combine(y_, h, T5{{{0, a81}, {3, a84}, {4, a85}, {5, a86}, {6, a87}}}, k));
    k[8] = eval(t_ + c9 * h, combine(y_, h, T6{{{0, a91}, {3, a94}, {4, a95}, {5, a96}, {6, a97}, {7, a98}}}, k));
    k[9] = eval(t_ + c10 * h,
                combine(y_, h, T7{{{0, a101}, {3, a104}, {4, a105}, {5, a106}, {6, a107}, {7, a108}, {8, a109}}}, k));
    k[10] = eval(t_ + c11 * h, combine(y_, h,
                                       T8{{{0, a111}, {3, a114}, {4, a115}, {5, a116}, {6, a117}, {7, a118},
                                           {8, a119}, {9, a1110}}},
                                       k));
    k[11] = eval(t_ + h, combine(y_, h,
                                 T9{{{0, a121}, {3, a124}, {4, a125}, {5, a126}, {6, a127}, {7, a128}, {8, a129},
                                     {9, a1210}, {10, a1211}}},
                                 k));
    for (std::size_t i = 0; i < N; ++i) {
      incr[i] = b1 * k[0][i] + b6 * k[5][i] + b7 * k[6][i] + b8 * k[7][i] + b9 * k[8][i] + b10 * k[9][i] +
                b11 * k[10][i] + b12 * k[11][i];
      y_new[i] = y_[i] + h * incr[i];
    }
  }

  double error_norm(double /*h*/, const Vector& y_new, const Vector& incr) const {
    using namespace dop853_tableau;
    const auto& k = k_;
    double err = 0.0;
    double err2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sk = 1.0 / (opt_.abs_tol + opt_.rel_tol * std::max(std::abs(y_[i]), std::abs(y_new[i])));
      double sqr = (incr[i] - bhh1 * k[0][i] - bhh2 * k[8][i] - bhh3 * k[11][i]) * sk;
      err2 += sqr * sqr;
      sqr = (er1 * k[0][i] + er6 * k[5][i] + er7 * k[6][i] + er8 * k[7][i] + er9 * k[8][i] + er10 * k[9][i] +
             er11 * k[10][i] + er12 * k[11][i]) *
            sk;
      err += sqr * sqr;
    }
    const double deno = err + 0.01 * err2;
    return err * std::sqrt(1.0 / (deno <= 0.0 ? static_cast<double>(N) : deno * N));
  }

  double initial_step(double hmax, double dir) {
    double dnf = 0.0;
    double dny = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sk = opt_.abs_tol + opt_.rel_tol * std::abs(y_[i]);
      dnf += (k_[0][i] / sk) * (k_[0][i] / sk);
      dny += (y_[i] / sk) * (y_[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min(h, hmax) * dir;
    Vector y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y_[i] + h * k_[0][i];
    const Vector f1 = eval(t_ + h, y1);
    double der2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sqr = (f1[i] - k_[0][i]) / (opt_.abs_tol + opt_.rel_tol * std::abs(y_[i]));
      der2 += sqr * sqr;
    }
    der2 = std::sqrt(der2) / std::abs(h);
    const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3) : std::pow(0.01 / der12, 0.125);
    return std::min({100.0 * std::abs(h), h1, hmax}) * dir;
  }

  void prepare_dense() const {
    using namespace dop853_tableau;
    using T8 = std::array<std::pair<int, double>, 8>;
    auto k = saved_;
    const double h = h_last_;
    const Vector& y = y_old_;
    k[13] = eval(t_old_ + c14 * h, combine(y, h,
                                           T8{{{0, a141}, {6, a147}, {7, a148}, {8, a149}, {9, a1410}, {10, a1411},
                                               {11, a1412}, {12, a1413}}},
                                           k));
    k[14] = eval(t_old_ + c15 * h, combine(y, h,
                                           T8{{{0, a151}, {5, a156}, {6, a157}, {7, a158}, {10, a1511}, {11, a1512},
                                               {12, a1513}, {13, a1514}}},
                                           k));
    k[15] = eval(t_old_ + c16 * h, combine(y, h,
                                           T8{{{0, a161}, {5, a166}, {6, a167}, {7, a168}, {8, a169}, {12, a1613},
                                               {13, a1614}, {14, a1615}}},
                                           k));
    for (std::size_t i = 0; i < N; ++i) {
      const double ydiff = y_[i] - y[i];
      const double bspl = h * k[0][i] - ydiff;
      rc_[0][i] = y[i];
      rc_[1][i] = ydiff;
      rc_[2][i] = bspl;
      rc_[3][i] = ydiff - h * k[12][i] - bspl;
      rc_[4][i] = h * (d41 * k[0][i] + d46 * k[5][i] + d47 * k[6][i] + d48 * k[7][i] + d49 * k[8][i] +
                       d410 * k[9][i] + d411 * k[10][i] + d412 * k[11][i] + d413 * k[12][i] + d414 * k[13][i] +
                       d415 * k[14][i] + d416 * k[15][i]);
      rc_[5][i] = h * (d51 * k[0][i] + d56 * k[5][i] + d57 * k[6][i] + d58 * k[7][i] + d59 * k[8][i] +
                       d510 * k[9][i] + d511 * k[10][i] + d512 * k[11][i] + d513 * k[12][i] + d514 * k[13][i] +
                       d515 * k[14][i] + d516 * k[15][i]);
      rc_[6][i] = h * (d61 * k[0][i] + d66 * k[5][i] + d67 * k[6][i] + d68 * k[7][i] + d69 * k[8][i] +
                       d610 * k[9][i] + d611 * k[10][i] + d612 * k[11][i] + d613 * k[12][i] + d614 * k[13][i] +
                       d615 * k[14][i] + d616 * k[15][i]);
      rc_[7][i] = h * (d71 * k[0][i] + d76 * k[5][i] + d77 * k[6][i] + d78 * k[7][i] + d79 * k[8][i] +
                       d710 * k[9][i] + d711 * k[10][i] + d712 * k[11][i] + d713 * k[12][i] + d714 * k[13][i] +
                       d715 * k[14][i] + d716 * k[15][i]);
    }
    dense_ready_ = true;
  }

  Field field_;
  Options opt_;
  double t_ = 0.0;
  double t_old_ = 0.0;
  double h_ = 0.0;
  double h_last_ = 0.0;
  Vector y_{};
  Vector y_old_{};
  std::array<Vector, 16> k_{};
  std::array<Vector, 16> saved_{};
  mutable std::array<Vector, 8> rc_{};
  mutable bool dense_ready_ = false;
  mutable std::size_t evals_ = 0;
  bool has_step_ = false;
  std::size_t steps_ = 0;
};

}  // namespace finsler
