#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "scimine/docmodel.hpp"

namespace scimine {

using Json = nlohmann::ordered_json;

inline constexpr const char* kParsedDocumentSchema = "parsed_document.v1";
inline constexpr const char* kAnnotationsSchema = "annotations.v1";

Json to_json(const TableGrid& grid);
TableGrid table_from_json(const Json& j);

Json to_json(const ParsedDocument& doc);
ParsedDocument parsed_document_from_json(const Json& j);

Json to_json(const Anchor& anchor);
Anchor anchor_from_json(const Json& j);

Json to_json(const Entity& e);
Entity entity_from_json(const Json& j);

Json to_json(const TableRelation& r);
TableRelation relation_from_json(const Json& j);

Json to_json(const AnnotatedDocument& doc);
AnnotatedDocument annotated_document_from_json(const Json& j);

Json to_json(const Finding& f);
Json to_json(const ValidationReport& report);

Json to_json(const PartitionManifest& m);
PartitionManifest partition_manifest_from_json(const Json& j);

Json to_json(const StatsTable& s);

/// One AnnotatedDocument per line.
std::string to_jsonl(const std::vector<AnnotatedDocument>& docs);
std::vector<AnnotatedDocument> annotations_from_jsonl(std::string_view text);

/// Stable dump used for every file the toolkit writes.
std::string dump(const Json& j, int indent = -1);

/// Throws Error(ParseFailure) with the offending context on bad input.
Json parse_json(std::string_view text);

}  // namespace scimine
