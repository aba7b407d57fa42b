#include "edgescout/cascade.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace edgescout;

namespace {

Mlp doubling_layer() {
    Mlp m;
    m.config = NetworkConfig::uniform(1, 1, 1.0, 0.0, 0, Activation::linear);
    DenseLayer l;
    l.activation = Activation::linear;
    l.weights = Matrix::Constant(1, 1, 2.0);
    l.bias = Vector::Zero(1);
    m.layers.push_back(l);
    return m;
}

Mlp small_net(double sw, std::size_t depth = 3, std::uint64_t seed = 1) {
    NetworkConfig c;
    c.depth = depth;
    c.widths.assign(depth + 1, 6);
    c.widths[0] = 8;
    c.sigma_w_sq = sw;
    c.sigma_b_sq = 0.05;
    c.seed = seed;
    return init_random(c);
}

bool same_layer(const DenseLayer& a, const DenseLayer& b) {
    return a.weights == b.weights && a.bias == b.bias && a.activation == b.activation;
}

}  // namespace

TEST(Decoder, InvertsADoublingLayer) {
    oracle::Gen g(5);
    const Mlp m = doubling_layer();
    DecoderOptions o;
    o.seed = 3;
    o.learning_rate = 1e-2;
    const Matrix x = g.matrix(20000, 1);
    const DecoderLayer d = train_decoder(m, 1, x, o);
    EXPECT_EQ(d.inner.activation, Activation::linear);
    const Matrix test = g.matrix(50, 1);
    const Matrix back = Cascade({d}).reconstruct(1, m.layers[0].forward(test));
    EXPECT_LT((back - test).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Decoder, ZeroLayerLearnsTheMeanTarget) {
    oracle::Gen g(6);
    Mlp m = small_net(0.0, 2);
    m.layers[1].bias.setZero();
    const Matrix x = g.matrix(20000, 8, 0.0, 1.0);
    DecoderOptions o;
    o.learning_rate = 1e-2;
    // z^2 is zero for every input, so the best decoder predicts the mean of z^1.
    const DecoderLayer d = train_decoder(m, 2, x, o);
    const Matrix z1 = forward_to(m, x, 1);
    const Matrix out = d.inner.forward(Matrix::Zero(1, 6));
    const RowVector mean = z1.colwise().mean();
    EXPECT_LT((out.row(0) - mean).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Decoder, RejectsBadIndicesAndShapes) {
    const Mlp m = small_net(1.0);
    const Matrix x = Matrix::Zero(4, 8);
    EXPECT_THROW(train_decoder(m, 0, x, {}), ArgumentError);
    EXPECT_THROW(train_decoder(m, 4, x, {}), ArgumentError);
    EXPECT_THROW(fit_decoder(1, Matrix::Zero(3, 2), Matrix::Zero(4, 2), {}), ArgumentError);
}

TEST(Decoder, DivergenceIsReported) {
    Matrix source = Matrix::Constant(8, 2, 1e200);
    Matrix target = Matrix::Constant(8, 2, -1e200);
    try {
        fit_decoder(1, source, target, {});
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.index(), 1u);
    }
}

TEST(TrainAll, ParallelEqualsSerialAndNetworkStaysFrozen) {
    oracle::Gen g(7);
    const Mlp m = small_net(1.5, 4);
    const Matrix x = g.matrix(300, 8, 0.0, 1.0);
    const auto before = m.checksum();
    DecoderOptions o;
    o.seed = 99;
    const auto serial = train_all_decoders(m, x, o, 1);
    const auto parallel = train_all_decoders(m, x, o, 3);
    EXPECT_EQ(m.checksum(), before);
    ASSERT_EQ(serial.size(), 4u);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_EQ(serial[l].layer_index, l + 1);
        EXPECT_TRUE(same_layer(serial[l].inner, parallel[l].inner)) << l;
        EXPECT_EQ(serial[l].inner.out_width(), m.layers[l].in_width());
        EXPECT_EQ(serial[l].inner.in_width(), m.layers[l].out_width());
        // Training one decoder on its own gives the same parameters.
        EXPECT_TRUE(same_layer(train_decoder(m, l + 1, x, o).inner, serial[l].inner)) << l;
    }
}

TEST(TrainAll, FailuresListLayers) {
    Mlp m = small_net(1.0, 2);
    Matrix x = Matrix::Constant(16, 8, 1e300);
    m.layers[0].activation = Activation::linear;
    try {
        train_all_decoders(m, x, {}, 1);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
        EXPECT_EQ(e.index(), 1u);
    }
}

TEST(Cascade, CompositionAndIdentity) {
    oracle::Gen g(8);
    const Mlp m = small_net(1.2, 3);
    const Cascade c(train_all_decoders(m, g.matrix(200, 8, 0.0, 1.0), {}, 1));
    const Matrix z3 = g.matrix(5, 6);
    const Matrix x = g.matrix(5, 8);
    EXPECT_EQ(c.reconstruct(0, x), x);
    const Matrix step = oracle::dense_forward(c.decoder(3).inner, z3);
    EXPECT_LT((c.reconstruct(3, z3) - c.reconstruct(2, step)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_THROW(c.reconstruct(4, z3), ArgumentError);
}

TEST(Cascade, RejectsBrokenChains) {
    std::mt19937_64 rng(1);
    DecoderLayer a{1, gaussian_layer(3, 4, 1, 0, Activation::linear, rng), 0.0};
    DecoderLayer b{2, gaussian_layer(2, 5, 1, 0, Activation::tanh, rng), 0.0};
    EXPECT_THROW(Cascade({a, b}), ArgumentError);
    EXPECT_THROW(Cascade({b}), ArgumentError);
}

TEST(Jvp, LinearDecoderIsItsWeightMatrix) {
    std::mt19937_64 rng(2);
    const DenseLayer d = gaussian_layer(4, 3, 1, 0.3, Activation::linear, rng);
    oracle::Gen g(2);
    const Matrix z = g.matrix(2, 4), v = g.matrix(2, 4);
    EXPECT_LT((jacobian_vector_product(d, z, v) - v * d.weights.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(jacobian_vector_product(d, z, Matrix::Zero(2, 4)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(jacobian_vector_product(d, z, Matrix::Zero(2, 3)), ArgumentError);
}

TEST(Jvp, CascadeMatchesFiniteDifferences) {
    oracle::Gen g(9);
    const Mlp m = small_net(2.0, 4);
    const Cascade c(train_all_decoders(m, g.matrix(300, 8, 0.0, 1.0), {}, 1));
    for (std::size_t l = 1; l <= 4; ++l) {
        const Matrix z = g.matrix(3, 6, -0.9, 0.9), v = g.matrix(3, 6);
        const double h = 1e-5;
        const Matrix fd = (c.reconstruct(l, z + h * v) - c.reconstruct(l, z - h * v)) / (2 * h);
        const Matrix jvp = c.jacobian_vector_product(l, z, v);
        EXPECT_LT((jvp - fd).norm() / std::max(fd.norm(), 1e-12), 1e-4) << "layer " << l;
    }
}

// Linearization of the reconstruction error: the remainder is second order.
TEST(Jvp, ReconstructionErrorIsFirstOrder) {
    oracle::Gen g(10);
    const Mlp m = small_net(1.76, 3);
    const Cascade c(train_all_decoders(m, g.matrix(300, 8, 0.0, 1.0), {}, 1));
    const Matrix z = forward_to(m, g.matrix(4, 8, 0.0, 1.0), 3);
    const Matrix dir = g.matrix(4, 6);
    double ratio_small = 0.0;
    for (double scale : {1e-4, 1e-5}) {
        const Matrix delta = scale * z.norm() / dir.norm() * dir;
        const Matrix rem = c.reconstruct(3, z + delta) - c.reconstruct(3, z) - c.jacobian_vector_product(3, z, delta);
        const double ratio = rem.norm() / delta.squaredNorm();
        EXPECT_LT(ratio, 50.0);
        ratio_small = ratio;
    }
    EXPECT_GT(ratio_small, 0.0);
}

TEST(Archetypes, OutputTemplateShapeAndDeterminism) {
    oracle::Gen g(11);
    const Mlp m = small_net(1.0, 3);
    const Cascade c(train_all_decoders(m, g.matrix(100, 8, 0.0, 1.0), {}, 1));
    RowVector onehot = RowVector::Zero(6);
    onehot[2] = 1.0;
    const RowVector img = reconstruct_from_output(c, m, onehot);
    EXPECT_EQ(img.size(), 8);
    EXPECT_TRUE(img.allFinite());
    EXPECT_EQ(reconstruct_from_output(c, m, RowVector::Zero(6)), reconstruct_from_output(c, m, RowVector::Zero(6)));
    std::vector<DecoderLayer> partial(c.decoders().begin(), c.decoders().begin() + 2);
    EXPECT_THROW(reconstruct_from_output(Cascade(partial), m, onehot), ArgumentError);
}

TEST(Checkpoint, SaveLoadRoundTripIsBitExact) {
    oracle::Gen g(12);
    const Mlp m = small_net(1.0, 3);
    const auto decs = train_all_decoders(m, g.matrix(64, 8, 0.0, 1.0), {}, 1);
    const auto path = std::filesystem::temp_directory_path() / "edgescout_decoders.bin";
    save_decoders(path, decs);
    const auto back = load_decoders(path);
    ASSERT_EQ(back.size(), decs.size());
    for (std::size_t i = 0; i < decs.size(); ++i) {
        EXPECT_EQ(back[i].layer_index, decs[i].layer_index);
        EXPECT_EQ(back[i].final_training_loss, decs[i].final_training_loss);
        EXPECT_TRUE(same_layer(back[i].inner, decs[i].inner));
    }
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    EXPECT_THROW(load_decoders(path), DataError);
}
