#pragma once

// Oracles and fixtures shared by the unit tests and the acceptance suite.

#include "mcsql/bench_data.hpp"
#include "mcsql/executor.hpp"
#include "mcsql/fewshot.hpp"
#include "mcsql/generator.hpp"
#include "mcsql/config.hpp"
#include "mcsql/selector.hpp"
#include "scripted_backend.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace mcsql::testing {

std::filesystem::path desk_dir();
std::filesystem::path golden_dir();
std::filesystem::path cli_path();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(std::string_view label = "t");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

std::string read_text(const std::filesystem::path& path);

// ---- synthetic candidate pools ----------------------------------------------

ResultFingerprint fingerprint_of_group(int group);

struct SyntheticPool {
    std::vector<CandidateQuery> candidates;
    std::vector<ExecutionOutcome> outcomes;
    // Group id per candidate, -1 for failed executions.
    std::vector<int> group_of;
};

// `size` candidates spread over a random number of groups, with random
// execution times and a sprinkling of failed executions.
SyntheticPool random_pool(std::mt19937_64& rng, std::size_t size);

// Pool whose ok outcomes follow `group_sizes`, exec time = 1 + position.
SyntheticPool pool_with_groups(const std::vector<int>& group_sizes);

// ---- execution equivalence ----------------------------------------------------

struct EquivalenceCase {
    std::string name;
    std::string db_id;
    std::string sql_a;
    std::string sql_b;
    bool equivalent = false;
};

// Hand-labelled query pairs over the desk databases.
std::vector<EquivalenceCase> equivalence_suite();

// Both queries run and produce the same fingerprint.
bool execution_equivalent(const std::filesystem::path& db, std::string_view a, std::string_view b);

std::filesystem::path desk_database(std::string_view db_id);

// ---- few-shot retrieval -------------------------------------------------------

// Entry ids of the top k by cosine, computed by a full scan and a full sort.
std::vector<std::string> brute_force_top_k(const ExampleIndex& index, const EmbeddingVector& query,
                                           SimilarityStrategy strategy, int k, std::string_view exclude_id);

// Random unit vectors; about one entry in ten duplicates an earlier vector so
// that ties occur.
ExampleIndex random_index(std::mt19937_64& rng, std::size_t entries, std::size_t dimension);
EmbeddingVector random_unit_vector(std::mt19937_64& rng, std::size_t dimension);

// ---- prompt goldens -------------------------------------------------------------

// Sorts the lines of every `# table ( ... )` block, the column list inside
// each such line and the foreign-key lines that follow, so that prompts
// rendered under any shuffle compare equal.
std::string normalize_schema_permutation(std::string_view prompt);

// The five molecule/bond prompts (table linking, column linking, question
// masking, SQL generation, SQL selection) rendered by the library.
std::map<std::string, std::string> molecule_bond_prompts(std::uint64_t seed);

// ---- desk fixtures ------------------------------------------------------------

RunConfig desk_config();

// Scripted backend over the desk benchmark. Owns the benchmarks the backend
// points into, so it is handed out behind a pointer.
struct ScriptedDesk {
    Benchmark dev;
    Benchmark train;
    std::shared_ptr<ScriptedBackend> backend;
};
std::unique_ptr<ScriptedDesk> scripted_desk(const nlohmann::json& script);
// Same, using the committed desk script.
std::unique_ptr<ScriptedDesk> scripted_desk();

const BenchmarkExample& example_by_id(const Benchmark& bench, std::string_view id);

// ---- VES ------------------------------------------------------------------------

// A table of `rows` rows with an index on `grp`, for timing comparisons.
void build_timing_db(const std::filesystem::path& path, int rows);

}  // namespace mcsql::testing
