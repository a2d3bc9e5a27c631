/**
 * Survey flow: answers are encoded in the page exactly as the nodes verify
 * them - the dual form. Every numeric answer is shared as an integer AND
 * bit by bit, booleans as single bits; the nodes then jointly confirm the
 * two encodings agree before the submission counts. The page only ever
 * uploads shares; the results view lists published aggregates and nothing
 * else (computation is governance-only).
 */

import { share } from './field.js';
import { bitsOf } from './encoding.js';
import { BrowserSession, MAJORITY, NODES, ProtocolError } from './session.js';
import { canonical } from './wire.js';

export interface AttributeSpec {
	type: 'bool' | 'uint';
	width?: number;
}

export type Schema = Record<string, AttributeSpec>;

export interface SurveyInfo {
	survey_id: string;
	schema: Schema;
	threshold: number;
	min_respondents: number;
	queries: { query_id: string }[];
	status: string;
}

export function attrWidth(schema: Schema, attr: string): number {
	const spec = schema[attr];
	return spec.type === 'bool' ? 1 : spec.width!;
}

export function validateAnswers(schema: Schema, answers: Record<string, number>): void {
	const schemaKeys = Object.keys(schema).sort();
	const answerKeys = Object.keys(answers).sort();
	if (canonical(schemaKeys) !== canonical(answerKeys)) {
		throw new ProtocolError('SchemaMismatch', `need answers for ${schemaKeys.join(', ')}`);
	}
	for (const attr of schemaKeys) {
		const value = answers[attr];
		if (!Number.isInteger(value) || value < 0 || value >= 1 << attrWidth(schema, attr)) {
			throw new ProtocolError('SchemaMismatch', `${attr}=${value} overflows its width`);
		}
	}
}

export async function surveyInfo(session: BrowserSession, surveyId: string): Promise<SurveyInfo> {
	const results = await session.requestEach('SURVEY_INFO', () => ({ survey_id: surveyId }));
	const docs = [...results.values()].filter((r): r is Record<string, unknown> => !(r instanceof ProtocolError));
	const counts = new Map<string, number>();
	for (const d of docs) counts.set(canonical(d), (counts.get(canonical(d)) ?? 0) + 1);
	const sorted = [...counts.entries()].sort((a, b) => b[1] - a[1]);
	if (!sorted.length || sorted[0][1] < MAJORITY) {
		throw new ProtocolError('RegistryInconsistent', 'no majority survey metadata');
	}
	return JSON.parse(sorted[0][0]) as SurveyInfo;
}

/** Dual-encode and share the answers; shape: perNode[node-1][attr]. */
export function encodeAnswers(schema: Schema, answers: Record<string, number>): Record<string, { int?: string; bits: string[] }>[] {
	validateAnswers(schema, answers);
	const perNode: Record<string, { int?: string; bits: string[] }>[] = NODES.map(() => ({}));
	for (const attr of Object.keys(schema).sort()) {
		const width = attrWidth(schema, attr);
		const value = answers[attr];
		const bitShares = bitsOf(value, width).map((bit) => share(BigInt(bit), MAJORITY));
		const intShares = schema[attr].type === 'bool' ? null : share(BigInt(value), MAJORITY);
		for (const node of NODES) {
			const enc: { int?: string; bits: string[] } = {
				bits: bitShares.map((bs) => bs[node - 1].v.toString()),
			};
			if (intShares) enc.int = intShares[node - 1].v.toString();
			perNode[node - 1][attr] = enc;
		}
	}
	return perNode;
}

export async function respond(session: BrowserSession, surveyId: string, answers: Record<string, number>): Promise<void> {
	const info = await surveyInfo(session, surveyId);
	const perNode = encodeAnswers(info.schema, answers);
	await session.requestAll('SURVEY_RESPOND', (node) => ({
		survey_id: surveyId,
		attrs: perNode[node - 1],
	}));
	// all five checks must be in flight together: the verification is a
	// joint computation that only completes once every node has joined
	await session.requestAll('SURVEY_CHECK', () => ({ survey_id: surveyId }));
}

export interface PublishedResult {
	query_id: string;
	numerator: number;
	denominator?: number;
	percentage?: string;
	respondents: number;
}

export async function results(session: BrowserSession, surveyId: string): Promise<PublishedResult[]> {
	const reply = await session.request(1, 'SURVEY_RESULTS', { survey_id: surveyId });
	return (reply as { results: PublishedResult[] }).results;
}
