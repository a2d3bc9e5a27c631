/** Byte/field/bit conversions shared by every flow. */

import { Share, reconstruct, share } from './field.js';

export const CHUNK_BYTES = 7; // 56-bit limbs stay below 2^61 - 1

export function bytesToChunks(data: Uint8Array): bigint[] {
	const out: bigint[] = [];
	for (let off = 0; off < data.length; off += CHUNK_BYTES) {
		let v = 0n;
		for (let j = off; j < Math.min(off + CHUNK_BYTES, data.length); j++) {
			v = (v << 8n) | BigInt(data[j]);
		}
		out.push(v);
	}
	return out.length ? out : [0n];
}

export function chunksToBytes(chunks: bigint[], length: number): Uint8Array {
	const out = new Uint8Array(length);
	let pos = 0;
	for (const chunk of chunks) {
		const take = Math.min(CHUNK_BYTES, length - pos);
		if (take <= 0) break;
		for (let j = take - 1; j >= 0; j--) {
			out[pos + j] = Number((chunk >> BigInt(8 * (take - 1 - j))) & 0xffn);
		}
		pos += take;
	}
	return out;
}

export function bitsOf(value: number, width: number): number[] {
	if (value < 0 || value >= 1 << width) throw new Error(`${value} does not fit ${width} bits`);
	return Array.from({ length: width }, (_, i) => (value >> i) & 1);
}

export function hexOf(data: Uint8Array): string {
	return Array.from(data, (b) => b.toString(16).padStart(2, '0')).join('');
}

export function fromHex(hex: string): Uint8Array {
	const out = new Uint8Array(hex.length / 2);
	for (let i = 0; i < out.length; i++) out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
	return out;
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
	const out = new Uint8Array(parts.reduce((n, part) => n + part.length, 0));
	let pos = 0;
	for (const part of parts) {
		out.set(part, pos);
		pos += part.length;
	}
	return out;
}

export function utf8(text: string): Uint8Array {
	return new TextEncoder().encode(text);
}

export function utf8Decode(data: Uint8Array): string {
	return new TextDecoder().decode(data);
}

/** Shares every chunk of a byte string; result[node-1] = that node's chunk list. */
export function shareBytes(data: Uint8Array, k: number): string[][] {
	const perNode: string[][] = [[], [], [], [], []];
	for (const chunk of bytesToChunks(data)) {
		for (const s of share(chunk, k)) perNode[s.i - 1].push(s.v.toString());
	}
	return perNode;
}

/** Rebuild bytes from per-node chunk lists keyed by node index. */
export function reconstructBytes(perNode: Map<number, string[]>, k: number, length: number): Uint8Array {
	const nodes = [...perNode.keys()].sort((a, b) => a - b);
	const chunkCount = perNode.get(nodes[0])!.length;
	const chunks: bigint[] = [];
	for (let c = 0; c < chunkCount; c++) {
		const shares: Share[] = nodes.map((i) => ({ i, v: BigInt(perNode.get(i)![c]) }));
		chunks.push(reconstruct(shares, k));
	}
	return chunksToBytes(chunks, length);
}
