#include <doctest.h>

#include <cmath>

#include "dmt/errors.hpp"
#include "dmt/tensor.hpp"

using namespace dmt;

TEST_CASE("construction checks element count against shape") {
  CHECK(Tensor({2, 3}).size() == 6);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_THROWS_AS(Tensor::matrix({{1.0, 2.0}, {3.0}}), DimensionError);
  const Tensor m = Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(m.shape() == Shape{2, 2});
  CHECK(m[3] == 4.0);
}

TEST_CASE("rank-0 tensors hold one value") {
  Tensor s(Shape{});
  CHECK(s.size() == 1);
  CHECK(s.rank() == 0);
}

TEST_CASE("elementwise arithmetic") {
  const Tensor a = Tensor::vector({1.0, -2.0, 3.0});
  const Tensor b = Tensor::vector({0.5, 0.5, -1.0});
  CHECK((a + b) == Tensor::vector({1.5, -1.5, 2.0}));
  CHECK((a - b) == Tensor::vector({0.5, -2.5, 4.0}));
  CHECK((2.0 * a) == Tensor::vector({2.0, -4.0, 6.0}));
  CHECK(axpby(2.0, a, -1.0, b) == Tensor::vector({1.5, -4.5, 7.0}));
  CHECK(sum(a) == 2.0);
  CHECK(squared_norm(a) == 14.0);
  CHECK(max_abs_diff(a, b) == 4.0);
  CHECK_THROWS_AS(a + Tensor::vector({1.0}), DimensionError);
  CHECK_THROWS_AS(a + Tensor({3, 1}), DimensionError);
}

TEST_CASE("reshape keeps data and rejects size changes") {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = a.reshaped({3, 2});
  CHECK(b.values() == a.values());
  CHECK_THROWS_AS(a.reshaped({4, 2}), DimensionError);
}

TEST_CASE("leading slices") {
  const Tensor a({3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK(a.slice_leading(1, 2) == Tensor({2, 2}, {3, 4, 5, 6}));
  CHECK(a.slice_leading(3, 0).size() == 0);
  CHECK_THROWS_AS(a.slice_leading(2, 2), IndexError);
}

TEST_CASE("stack and unstack are inverse") {
  const std::vector<Tensor> items{Tensor::vector({1, 2}), Tensor::vector({3, 4}),
                                  Tensor::vector({5, 6})};
  const Tensor s = stack(items);
  CHECK(s.shape() == Shape{3, 2});
  CHECK(unstack(s) == items);
  CHECK_THROWS_AS(stack(std::vector<Tensor>{}), ContractError);
  CHECK_THROWS_AS(stack(std::vector<Tensor>{Tensor::vector({1}), Tensor::vector({1, 2})}),
                  DimensionError);
}

TEST_CASE("finite check") {
  Tensor a = Tensor::vector({1.0, 2.0});
  CHECK(a.all_finite());
  a[1] = std::nan("");
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("gradient buffer is created on demand") {
  Tensor a({2});
  CHECK_FALSE(a.has_grad());
  a.ensure_grad()[1] = 3.0;
  CHECK(a.has_grad());
  CHECK(a.grad()[1] == 3.0);
  CHECK(a.ensure_grad()[1] == 3.0);
  a.clear_grad();
  CHECK_FALSE(a.has_grad());
}
