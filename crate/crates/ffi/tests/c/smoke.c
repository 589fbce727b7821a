#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "hybp.h"

#define W 32
#define H 32
#define N 4

static int fail(const char *what, HybpStatus st) {
    const char *msg = hybp_last_error();
    fprintf(stderr, "%s: status %d (%s)\n", what, (int)st, msg ? msg : "no message");
    return 1;
}

int main(void) {
    static uint8_t samples[W * H * N];
    for (int f = 0; f < N; f++)
        for (int y = 0; y < H; y++)
            for (int x = 0; x < W; x++)
                samples[(f * H + y) * W + x] = (uint8_t)(4 * ((x + 2 * f) % 32) + 2 * y);

    HybpEncoder *enc = NULL;
    HybpStatus st = hybp_encoder_new(&enc);
    if (st != HYBP_STATUS_OK) return fail("encoder_new", st);
    st = hybp_encoder_configure(enc, HYBP_METHOD_TRADITIONAL, 4, 64, 42);
    if (st != HYBP_STATUS_OK) return fail("configure", st);

    HybpStream *stream = NULL;
    st = hybp_encode(enc, samples, W, H, N, 30, 500.0, &stream);
    if (st != HYBP_STATUS_OK) return fail("encode", st);

    size_t len = 0;
    const uint8_t *bytes = hybp_stream_bytes(stream, &len);
    HybpDecoded *dec = NULL;
    st = hybp_decode(bytes, len, true, &dec);
    if (st != HYBP_STATUS_OK) return fail("decode", st);

    uint32_t w, h, n, fps;
    st = hybp_decoded_info(dec, &w, &h, &n, &fps);
    if (st != HYBP_STATUS_OK) return fail("info", st);
    if (w != W || h != H || n != N || fps != 30) return fail("dimensions", st);
    /* Traditional streams at this rate are lossless. */
    if (memcmp(hybp_decoded_frame(dec, 0), samples, W * H) != 0) return fail("frame 0", st);
    if (hybp_decoded_frame(dec, N) != NULL) return fail("frame range", st);

    uint8_t *bad = malloc(len);
    memcpy(bad, bytes, len);
    bad[len - 5] ^= 0x40;
    HybpDecoded *none = NULL;
    st = hybp_decode(bad, len, false, &none);
    if (st != HYBP_STATUS_CHECKSUM || none != NULL || hybp_last_error() == NULL) return fail("corrupt", st);

    free(bad);
    hybp_decoded_free(dec);
    hybp_stream_free(stream);
    hybp_encoder_free(enc);
    puts("ok");
    return 0;
}
