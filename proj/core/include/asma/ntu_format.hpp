#pragma once

#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

#include "asma/skeleton.hpp"

ASMA_NAMESPACE_BEGIN

/// Reads the NTU RGB+D `.skeleton` text layout:
///
///   <frame count>
///   per frame: <body count>
///     per body: <body header: bodyID + tracking fields>
///               <joint count>
///               per joint: x y z [ignored extra fields...]
///
/// Every distinct body id becomes one 3 x frames x 25 sequence, ordered by
/// first appearance; frames where a body is absent stay zero. Errors are
/// ParseError with MalformedRecord, NonNumericField or EmptyFile.
std::vector<SkeletonSequence> parse_ntu_skeleton(std::istream& in, const GraphPtr& graph);
std::vector<SkeletonSequence> parse_ntu_skeleton(std::string_view text, const GraphPtr& graph);

/// Writes sequences as one body each per frame, in the same layout. Joint
/// lines carry only x y z.
void write_ntu_skeleton(std::ostream& out, const std::vector<SkeletonSequence>& bodies);

/// Action label encoded in an NTU file name (`...A017...` -> 16), if any.
std::optional<int> ntu_label_from_filename(std::string_view name);

ASMA_NAMESPACE_END
