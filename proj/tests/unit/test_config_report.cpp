// Copyright 2026 The optperf-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "optperf/config.hpp"
#include "optperf/report.hpp"

namespace optperf {
namespace {

const std::filesystem::path kConfigs = std::filesystem::path(OPTPERF_SOURCE_DIR) / "configs";

class SeedEnv : public ::testing::Test {
protected:
    void SetUp() override { unsetenv("OPTPERF_SEED"); }
    void TearDown() override { unsetenv("OPTPERF_SEED"); }
};

TEST_F(SeedEnv, ShippedConfigsLoad) {
    for (const auto& entry : std::filesystem::directory_iterator(kConfigs)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    }
}

TEST_F(SeedEnv, CountExpandsNodes) {
    const auto c = load_config(kConfigs / "cluster_b_16node.json");
    ASSERT_EQ(c.cluster.size(), 16U);
    EXPECT_EQ(c.node_names[4], "v100#0");
    EXPECT_EQ(c.cluster.nodes[15].node_id, 15);
    EXPECT_EQ(c.cluster.nodes[15].k, 0.0024);
    EXPECT_FALSE(c.cluster.max_local_batch.has_value());
}

TEST_F(SeedEnv, JsonRoundTrip) {
    auto c = load_config(kConfigs / "cluster_a_3node.json");
    c.cluster.max_local_batch = std::vector<std::int64_t>{200, kUncapped, 50};
    c.adaptive.b_ref = 48.5;
    const auto j = config_to_json(c);
    const auto back = config_from_json(j);
    EXPECT_EQ(back.cluster, c.cluster);
    EXPECT_EQ(config_to_json(back).dump(), j.dump());
}

TEST_F(SeedEnv, EnvironmentOverridesSeed) {
    setenv("OPTPERF_SEED", "12345", 1);
    EXPECT_EQ(load_config(kConfigs / "cluster_a_3node.json").simulation.seed, 12345U);
    setenv("OPTPERF_SEED", "12x", 1);
    EXPECT_THROW(load_config(kConfigs / "cluster_a_3node.json"), ConfigError);
}

TEST_F(SeedEnv, MissingFileNamesPath) {
    try {
        load_config("/nonexistent/cfg.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/cfg.json"), std::string::npos);
    }
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    auto j = config_to_json(load_config(kConfigs / "two_node.json"));
    auto bad = j;
    bad["cluster"]["typo"] = 1;
    EXPECT_THROW(config_from_json(bad), ConfigError);
    bad = j;
    bad["cluster"]["gamma"] = 1.2;
    EXPECT_THROW(config_from_json(bad), ConfigError);
    bad = j;
    bad["adaptive"]["b_min"] = 1;
    EXPECT_THROW(config_from_json(bad), ConfigError);
    bad = j;
    bad["cluster"]["nodes"][0]["q"] = "fast";
    EXPECT_THROW(config_from_json(bad), ConfigError);
    bad = j;
    bad["simulation"]["n_buckets"] = 1;
    EXPECT_THROW(config_from_json(bad), ConfigError);
}

TEST(Config, SchemaListsTheLoaderKeys) {
    std::ifstream in(std::filesystem::path(OPTPERF_SOURCE_DIR) / "docs" / "schema.json");
    ASSERT_TRUE(in);
    nlohmann::json schema;
    in >> schema;
    auto keys = [](const nlohmann::json& obj) {
        std::set<std::string> out;
        for (const auto& [k, _] : obj.at("properties").items()) out.insert(k);
        return out;
    };
    EXPECT_EQ(keys(schema), config_keys(""));
    const auto& props = schema.at("properties");
    EXPECT_EQ(keys(props.at("cluster")), config_keys("cluster"));
    EXPECT_EQ(keys(props.at("cluster").at("properties").at("nodes").at("items")), config_keys("node"));
    EXPECT_EQ(keys(props.at("simulation")), config_keys("simulation"));
    EXPECT_EQ(keys(props.at("gradients")), config_keys("gradients"));
    EXPECT_EQ(keys(props.at("adaptive")), config_keys("adaptive"));
}

TEST(Report, NineSignificantDigits) {
    EXPECT_EQ(fmt9(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(fmt9(123456789012.0), "1.23456789e+11");
    EXPECT_EQ(fmt9(NAN), "nan");
    EXPECT_TRUE(json9(NAN).is_null());
    EXPECT_EQ(json9(2.0 / 3.0).dump(), "0.666666667");
}

std::vector<EpochReport> sample_reports() {
    EpochReport a;
    a.epoch = 0;
    a.chosen_B = 64;
    a.alloc = {32, 32};
    a.realized_T_mean = 0.123456789123;
    a.b_noise = 101.5;
    a.efficiency = 0.75;
    a.goodput = 389.1;
    a.scenario = "even";
    EpochReport b = a;
    b.epoch = 1;
    b.predicted_T = 0.2;
    b.predicted_even_T = 0.25;
    b.model_ready = true;
    b.scenario = "Mixed(1)";
    b.solver_calls = 3;
    return {a, b};
}

TEST(Report, CsvColumns) {
    std::ostringstream os;
    write_csv(os, sample_reports(), 2);
    std::string header;
    std::istringstream is(os.str());
    std::getline(is, header);
    EXPECT_EQ(header, "epoch,chosen_B,b_0,b_1,predicted_T,realized_T_mean,b_noise,efficiency,goodput,scenario");
    std::string row;
    std::getline(is, row);
    EXPECT_EQ(row, "0,64,32,32,nan,0.123456789,101.5,0.75,389.1,even");
}

TEST(Report, JsonRoundTripIsLossless) {
    const auto j = reports_to_json(sample_reports());
    const auto back = reports_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(reports_to_json(back).dump(), j.dump());
    EXPECT_TRUE(std::isnan(back[0].predicted_T));
    EXPECT_EQ(back[1].scenario, "Mixed(1)");
}

}  // namespace
}  // namespace optperf
